#include "tvts/sampling.hpp"

#include <algorithm>
#include <cfenv>
#include <cmath>

namespace tvts::corpus {

TranscriptWindow sample_transcript_window(const TranscriptRecord& stream, double s_begin, int k, double l) {
  if (k < 2) throw ConfigError("transcript window: K must be >= 2");
  if (l <= 0.0) throw ConfigError("transcript window: l must be > 0");
  const double span_end = s_begin + k * l + (k - 1) * 1.0;
  if (s_begin < 0.0 || span_end > stream.duration_s) {
    throw RangeError("transcript window [" + std::to_string(s_begin) + ", " + std::to_string(span_end) +
                     "] exceeds stream duration " + std::to_string(stream.duration_s));
  }
  TranscriptWindow w;
  w.s_begin = s_begin;
  w.l = l;
  w.k = k;
  w.spans.reserve(static_cast<size_t>(k));
  w.texts.assign(static_cast<size_t>(k), {});
  w.perm.resize(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i) {
    const double sk = s_begin + static_cast<double>(i) * (l + 1.0);
    w.spans.emplace_back(sk, sk + l);
    w.perm[static_cast<size_t>(i)] = i;
  }
  for (const auto& tw : stream.words) {
    for (int i = 0; i < k; ++i) {
      const auto [sk, ek] = w.spans[static_cast<size_t>(i)];
      if (tw.timestamp >= sk && tw.timestamp <= ek) {  // closed on both ends
        w.texts[static_cast<size_t>(i)].push_back(tw.word);
        break;  // 1 s gaps make spans disjoint, so a word joins at most one
      }
    }
  }
  for (int i = 0; i < k; ++i) {
    if (w.texts[static_cast<size_t>(i)].empty()) {
      throw EmptyTranscriptError("transcript " + std::to_string(i + 1) + " of window at s_begin=" +
                                 std::to_string(s_begin) + " is empty");
    }
  }
  return w;
}

void shuffle_transcripts(TranscriptWindow& window, Rng& rng) {
  if (window.k < 2) throw ConfigError("shuffle_transcripts: K must be >= 2");
  const std::vector<int> perm = rng.permutation(window.k);
  std::vector<std::vector<std::string>> texts(static_cast<size_t>(window.k));
  std::vector<int> composed(static_cast<size_t>(window.k));
  for (int i = 0; i < window.k; ++i) {
    // slot i now holds what slot perm[i] held; composes with a prior shuffle
    const size_t src = static_cast<size_t>(perm[static_cast<size_t>(i)]);
    texts[static_cast<size_t>(i)] = std::move(window.texts[src]);
    composed[static_cast<size_t>(i)] = window.perm[src];
  }
  window.texts = std::move(texts);
  window.perm = std::move(composed);
}

TranscriptWindow unshuffle(const TranscriptWindow& window) {
  TranscriptWindow out = window;
  for (int i = 0; i < window.k; ++i) {
    const size_t truth = static_cast<size_t>(window.perm[static_cast<size_t>(i)]);
    out.texts[truth] = window.texts[static_cast<size_t>(i)];
    out.perm[truth] = static_cast<int>(truth);
  }
  return out;
}

std::vector<int> sample_clip_indices(double fps, int frame_count, double s1, double ek, int m, Rng& rng) {
  if (ek <= s1) throw ConfigError("clip sampling: span end must exceed start");
  if (m < 1) throw ConfigError("clip sampling: M must be >= 1");
  std::vector<int> out;
  out.reserve(static_cast<size_t>(m));
  const double seg = (ek - s1) / static_cast<double>(m);
  constexpr double kFuzz = 1e-9;
  for (int j = 0; j < m; ++j) {
    const double lo_t = s1 + seg * static_cast<double>(j);
    const double hi_t = s1 + seg * static_cast<double>(j + 1);
    int lo = static_cast<int>(std::ceil(lo_t * fps - kFuzz));
    // segments are half-open except the last, which closes at E_K
    int hi = (j == m - 1) ? static_cast<int>(std::floor(hi_t * fps + kFuzz))
                          : static_cast<int>(std::ceil(hi_t * fps - kFuzz)) - 1;
    lo = std::max(lo, 0);
    hi = std::min(hi, frame_count - 1);
    if (lo > hi) {
      throw SamplingError("no stored frame in segment " + std::to_string(j) + " of [" + std::to_string(s1) +
                          ", " + std::to_string(ek) + "] at fps " + std::to_string(fps));
    }
    // segments are disjoint index ranges, so picks are strictly increasing
    const int pick = lo + static_cast<int>(rng.below(static_cast<uint64_t>(hi - lo + 1)));
    out.push_back(pick);
  }
  return out;
}

ClipFrames sample_clip_frames(const FrameStore& store, const VideoMeta& meta, double s1, double ek,
                              int m, Rng& rng) {
  const std::vector<int> idx = sample_clip_indices(meta.fps, meta.frame_count, s1, ek, m, rng);
  ClipFrames clip;
  clip.h = meta.h;
  clip.w = meta.w;
  clip.frames.reserve(idx.size());
  clip.timestamps.reserve(idx.size());
  for (int i : idx) {
    const auto& raw = store.frame(meta.id, i);
    std::vector<float> f(raw.size());
    for (size_t j = 0; j < raw.size(); ++j) f[j] = static_cast<float>(raw[j]) / 255.0f;
    clip.frames.push_back(std::move(f));
    clip.timestamps.push_back(static_cast<double>(i) / meta.fps);
  }
  return clip;
}

int round_half_even(double x) {
  // nearbyint honours the default FE_TONEAREST mode, which ties to even
  return static_cast<int>(std::nearbyint(x));
}

MaskPattern build_mask(int tokens_per_slice, int num_slices, double ratio, Rng& rng) {
  if (ratio < 0.0 || ratio >= 1.0) throw ConfigError("mask ratio must be in [0, 1)");
  if (tokens_per_slice < 1 || num_slices < 1) throw ConfigError("mask grid must be non-empty");
  const int visible = round_half_even((1.0 - ratio) * static_cast<double>(tokens_per_slice));
  if (visible < 1) throw ConfigError("mask ratio " + std::to_string(ratio) + " leaves no visible token per slice");
  MaskPattern mp;
  mp.ratio = ratio;
  mp.tokens_per_slice = tokens_per_slice;
  mp.visible.reserve(static_cast<size_t>(num_slices));
  std::vector<int> pool(static_cast<size_t>(tokens_per_slice));
  for (int s = 0; s < num_slices; ++s) {
    for (int i = 0; i < tokens_per_slice; ++i) pool[static_cast<size_t>(i)] = i;
    // partial Fisher-Yates: first `visible` entries are a uniform subset
    for (int i = 0; i < visible; ++i) {
      const int j = i + static_cast<int>(rng.below(static_cast<uint64_t>(tokens_per_slice - i)));
      std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(j)]);
    }
    std::vector<int> vis(pool.begin(), pool.begin() + visible);
    std::sort(vis.begin(), vis.end());
    mp.visible.push_back(std::move(vis));
  }
  return mp;
}

}  // namespace tvts::corpus
