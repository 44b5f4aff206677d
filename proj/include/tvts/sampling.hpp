#pragma once

#include <utility>
#include <vector>

#include "tvts/corpus.hpp"
#include "tvts/rng.hpp"

namespace tvts::corpus {

// K consecutive transcript spans with a fixed 1 s gap:
//   S_k = s_begin + (k-1)(l+1), E_k = S_k + l;
// word membership is closed on both ends.
struct TranscriptWindow {
  double s_begin = 0.0;
  double l = 0.0;
  int k = 0;
  std::vector<std::pair<double, double>> spans;       // true chronological order
  std::vector<std::vector<std::string>> texts;        // slot i holds transcript perm[i]
  std::vector<int> perm;                              // 0-based bijection on {0..K-1}
};

TranscriptWindow sample_transcript_window(const TranscriptRecord& stream, double s_begin, int k, double l);
void shuffle_transcripts(TranscriptWindow& window, Rng& rng);
TranscriptWindow unshuffle(const TranscriptWindow& window);  // inverse reorder, perm -> identity

// TSN sampling: frame indices for M equal segments of [s1, ek], one uniform
// pick per segment from the stored grid at `fps`.
std::vector<int> sample_clip_indices(double fps, int frame_count, double s1, double ek, int m, Rng& rng);

struct ClipFrames {
  std::vector<std::vector<float>> frames;  // each h*w*3 in [0, 1], stored resolution
  std::vector<double> timestamps;          // strictly increasing
  int h = 0, w = 0;
};

ClipFrames sample_clip_frames(const FrameStore& store, const VideoMeta& meta, double s1, double ek,
                              int m, Rng& rng);

// Per-temporal-slice visible token indices (sorted), independent across slices.
struct MaskPattern {
  std::vector<std::vector<int>> visible;
  double ratio = 0.0;
  int tokens_per_slice = 0;

  int visible_per_slice() const { return visible.empty() ? 0 : static_cast<int>(visible.front().size()); }
  int total_visible() const {
    int n = 0;
    for (const auto& v : visible) n += static_cast<int>(v.size());
    return n;
  }
};

MaskPattern build_mask(int tokens_per_slice, int num_slices, double ratio, Rng& rng);
int round_half_even(double x);

}  // namespace tvts::corpus
