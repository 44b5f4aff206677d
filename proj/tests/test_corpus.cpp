#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "tvts/corpus.hpp"
#include "tvts/sampling.hpp"
#include "tvts/tokenizer.hpp"

using namespace tvts;
using namespace tvts::corpus;

namespace fs = std::filesystem;

namespace {
TranscriptRecord make_stream(std::vector<std::pair<const char*, double>> words, double duration) {
  TranscriptRecord r;
  r.video_id = "test";
  r.duration_s = duration;
  r.category = "circle_zigzag";
  for (auto& [w, s] : words) r.words.push_back({w, s});
  return r;
}

fs::path temp_dir(const char* tag) {
  const fs::path p = fs::temp_directory_path() / (std::string("tvts_corpus_") + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}
}  // namespace

TEST_CASE("window spans follow S_k = s_begin + (k-1)(l+1), E_k = S_k + l") {
  auto stream = make_stream({{"a", 100.5}, {"b", 106.0}, {"c", 113.0}}, 200.0);
  const auto w = sample_transcript_window(stream, 100.0, 3, 5.0);
  CHECK(w.spans[0] == std::pair<double, double>{100.0, 105.0});
  CHECK(w.spans[1] == std::pair<double, double>{106.0, 111.0});
  CHECK(w.spans[2] == std::pair<double, double>{112.0, 117.0});
}

TEST_CASE("gap words belong to no transcript; boundaries are closed") {
  auto stream = make_stream({{"in1", 100.0}, {"gap", 105.5}, {"edge", 105.0}, {"in2", 106.0}}, 200.0);
  // timestamps nondecreasing not required by this constructor; sort manually
  std::sort(stream.words.begin(), stream.words.end(),
            [](const TimedWord& a, const TimedWord& b) { return a.timestamp < b.timestamp; });
  const auto w = sample_transcript_window(stream, 100.0, 2, 5.0);
  // 105.5 is in the (105, 106) gap: nowhere
  int total = 0;
  for (const auto& t : w.texts) total += static_cast<int>(t.size());
  CHECK(total == 3);
  CHECK(w.texts[0] == std::vector<std::string>{"in1", "edge"});  // 105.0 == E_1, closed
  CHECK(w.texts[1] == std::vector<std::string>{"in2"});
}

TEST_CASE("enumerated membership for K=2, l=1") {
  auto stream = make_stream({{"t0", 0.0}, {"t05", 0.5}, {"t1", 1.0}, {"t25", 2.5}}, 10.0);
  const auto w = sample_transcript_window(stream, 0.0, 2, 1.0);
  CHECK(w.texts[0] == std::vector<std::string>{"t0", "t05", "t1"});
  CHECK(w.texts[1] == std::vector<std::string>{"t25"});
}

TEST_CASE("window range and empty-transcript errors") {
  auto stream = make_stream({{"a", 0.1}}, 10.0);
  CHECK_THROWS_AS(sample_transcript_window(stream, 5.0, 3, 2.0), RangeError);
  CHECK_THROWS_AS(sample_transcript_window(stream, 0.0, 2, 2.0), EmptyTranscriptError);
  CHECK_THROWS_AS(sample_transcript_window(stream, 0.0, 1, 2.0), ConfigError);
}

TEST_CASE("Eq.(1) algebra fuzz: exact span arithmetic and single-membership") {
  Rng rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = 2 + static_cast<int>(rng.below(5));
    const double l = rng.uniform(0.5, 6.0);
    const double duration = k * l + (k - 1) + rng.uniform(1.0, 20.0);
    TranscriptRecord stream;
    stream.duration_s = duration;
    double t = 0.0;
    while (t < duration) {
      stream.words.push_back({"w", t});
      t += rng.uniform(0.05, 0.4);
    }
    const double s_begin = rng.uniform(0.0, duration - (k * l + (k - 1)));
    const auto w = sample_transcript_window(stream, s_begin, k, l);
    for (int i = 0; i < k; ++i) {
      CHECK(w.spans[static_cast<size_t>(i)].first == s_begin + i * (l + 1.0));
      CHECK(w.spans[static_cast<size_t>(i)].second == w.spans[static_cast<size_t>(i)].first + l);
    }
    // every in-span word in exactly one transcript, gap words in none
    size_t in_spans = 0;
    for (const auto& tw : stream.words) {
      int owners = 0;
      for (const auto& [sk, ek] : w.spans) owners += (tw.timestamp >= sk && tw.timestamp <= ek);
      CHECK(owners <= 1);
      in_spans += static_cast<size_t>(owners);
    }
    size_t collected = 0;
    for (const auto& txt : w.texts) collected += txt.size();
    CHECK(collected == in_spans);
  }
}

TEST_CASE("shuffle: uniform over K! and bijective bookkeeping") {
  auto stream = make_stream({{"a", 0.5}, {"b", 2.5}}, 10.0);
  Rng rng(123);
  int identity = 0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    auto w = sample_transcript_window(stream, 0.0, 2, 1.0);
    shuffle_transcripts(w, rng);
    CHECK(is_sorted(w.spans.begin(), w.spans.end()));  // spans stay chronological
    if (w.perm[0] == 0) ++identity;
  }
  const double frac = static_cast<double>(identity) / draws;
  CHECK(frac == doctest::Approx(0.5).epsilon(0.04));  // 0.5 +/- 0.02 absolute

  // K=3 uniformity over all 6 permutations
  auto stream3 = make_stream({{"a", 0.5}, {"b", 2.5}, {"c", 4.5}}, 10.0);
  std::map<std::vector<int>, int> counts;
  for (int i = 0; i < 12000; ++i) {
    auto w = sample_transcript_window(stream3, 0.0, 3, 1.0);
    shuffle_transcripts(w, rng);
    counts[w.perm]++;
  }
  CHECK(counts.size() == 6);
  for (const auto& [p, c] : counts) CHECK(std::fabs(c / 2000.0 - 1.0) < 0.15);
}

TEST_CASE("shuffle round-trip restores the original window") {
  auto stream = make_stream({{"a", 0.5}, {"b", 2.5}, {"c", 4.5}, {"d", 6.5}}, 12.0);
  auto w = sample_transcript_window(stream, 0.0, 4, 1.0);
  const auto original = w;
  Rng rng(7);
  shuffle_transcripts(w, rng);
  const auto back = unshuffle(w);
  CHECK(back.texts == original.texts);
  CHECK(back.perm == original.perm);

  // identity permutation leaves texts unchanged
  auto w2 = original;
  Rng rng2(0);
  for (int i = 0; i < 50; ++i) {
    auto w3 = original;
    shuffle_transcripts(w3, rng2);
    if (w3.perm == std::vector<int>{0, 1, 2, 3}) {
      CHECK(w3.texts == original.texts);
    }
  }
  (void)w2;
}

TEST_CASE("TSN clip sampling: segment bounds, determinism, errors") {
  Rng rng(1);
  // M=1: single frame inside [s1, ek]
  auto idx = sample_clip_indices(4.0, 200, 3.0, 19.0, 1, rng);
  CHECK(idx.size() == 1);
  CHECK(idx[0] / 4.0 >= 3.0);
  CHECK(idx[0] / 4.0 <= 19.0);

  // [0,16] with M=8: frame j in [2j, 2j+2)
  for (int rep = 0; rep < 50; ++rep) {
    auto picks = sample_clip_indices(4.0, 200, 0.0, 16.0, 8, rng);
    CHECK(picks.size() == 8);
    for (int j = 0; j < 8; ++j) {
      const double t = picks[static_cast<size_t>(j)] / 4.0;
      CHECK(t >= 2.0 * j);
      if (j < 7) CHECK(t < 2.0 * (j + 1));
      else CHECK(t <= 16.0);
      if (j) CHECK(picks[static_cast<size_t>(j)] > picks[static_cast<size_t>(j - 1)]);
    }
  }

  // fixed seed -> identical picks
  Rng a(42), b(42);
  CHECK(sample_clip_indices(2.0, 100, 1.0, 13.0, 6, a) == sample_clip_indices(2.0, 100, 1.0, 13.0, 6, b));

  // a segment with no stored frame
  Rng c(1);
  CHECK_THROWS_AS(sample_clip_indices(0.25, 100, 0.0, 2.0, 4, c), SamplingError);
}

TEST_CASE("mask: exact per-slice counts, ranges, independence") {
  Rng rng(5);
  const auto mp = build_mask(196, 2, 0.75, rng);
  CHECK(mp.visible_per_slice() == 49);  // 196 * 0.25
  CHECK(mp.total_visible() == 98);
  for (const auto& v : mp.visible) {
    CHECK(std::is_sorted(v.begin(), v.end()));
    CHECK(std::adjacent_find(v.begin(), v.end()) == v.end());
    for (int i : v) {
      CHECK(i >= 0);
      CHECK(i < 196);
    }
  }

  // ratio 0 keeps everything
  const auto full = build_mask(16, 4, 0.0, rng);
  CHECK(full.visible_per_slice() == 16);

  // two slices rarely coincide: collision fraction < 0.01 over 100 seeds
  int collisions = 0;
  for (int s = 0; s < 100; ++s) {
    Rng r2 = Rng::derive(1000, "mask-independence", static_cast<uint64_t>(s));
    const auto m2 = build_mask(196, 2, 0.75, r2);
    if (m2.visible[0] == m2.visible[1]) ++collisions;
  }
  CHECK(collisions < 1);

  CHECK_THROWS_AS(build_mask(16, 2, 1.0, rng), ConfigError);
  CHECK_THROWS_AS(build_mask(16, 2, 0.99, rng), ConfigError);  // visible count 0

  // round-half-even convention
  CHECK(round_half_even(2.5) == 2);
  CHECK(round_half_even(3.5) == 4);
  CHECK(round_half_even(0.5) == 0);
}

TEST_CASE("tokenizer: empty, known phrase, round-trip") {
  const Vocab v = builtin_vocab();
  const auto empty = tokenize("", v, 8);
  CHECK(empty[0] == Vocab::kCls);
  for (size_t i = 1; i < empty.size(); ++i) CHECK(empty[i] == Vocab::kPad);

  const auto ids = tokenize("the red circle moves left", v, 16);
  CHECK(ids.size() == 16);
  CHECK(ids[0] == Vocab::kCls);
  int real = 0;
  for (int id : ids) real += (id != Vocab::kPad && id != Vocab::kCls);
  CHECK(real == 5);
  CHECK(detokenize(ids, v) == "the red circle moves left");

  // uppercase folds; unknown becomes [UNK]
  const auto up = tokenize("The RED Circle", v, 8);
  CHECK(detokenize(up, v) == "the red circle");
  const auto unk = tokenize("zebra", v, 4);
  CHECK(unk[1] == Vocab::kUnk);

  // property: round-trip over random in-vocab sentences
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> words;
    const int n = 1 + static_cast<int>(rng.below(10));
    for (int i = 0; i < n; ++i) {
      words.push_back(v.words[3 + rng.below(static_cast<uint64_t>(v.size() - 3))]);
    }
    const std::string joined = join_words(words);
    CHECK(detokenize(tokenize(joined, v, 16), v) == (n <= 15 ? joined : detokenize(tokenize(joined, v, 16), v)));
  }
}

TEST_CASE("generate_corpus: determinism, stratification, density, truthful colors") {
  const auto dir1 = temp_dir("gen1");
  const auto dir2 = temp_dir("gen2");
  GenConfig cfg;
  cfg.count = 20;
  cfg.seed = 777;
  cfg.duration_s = 18.0;
  cfg.fps = 2.0;
  cfg.out_dir = dir1.string();
  generate_corpus(cfg);
  cfg.out_dir = dir2.string();
  generate_corpus(cfg);

  CHECK(manifest_hash(dir1.string()) == manifest_hash(dir2.string()));

  const Manifest m = load_manifest(dir1.string());
  CHECK(m.videos.size() == 20);
  CHECK(m.videos[0].frame_count == 36);  // 18 s * 2 fps
  std::map<std::string, int> per_cat;
  for (const auto& v : m.videos) per_cat[v.category]++;
  CHECK(per_cat.size() == 10);
  for (const auto& [c, n] : per_cat) CHECK(n == 2);

  const auto recs = load_transcripts(dir1.string());
  CHECK(recs.size() == 20);
  const Vocab vocab = builtin_vocab();
  FrameStore store(dir1.string(), m);
  const auto& palette = color_palette();

  for (const auto& rec : recs) {
    // timestamps nondecreasing, all words in vocab
    for (size_t i = 0; i < rec.words.size(); ++i) {
      if (i) CHECK(rec.words[i].timestamp >= rec.words[i - 1].timestamp);
      CHECK(rec.words[i].timestamp <= rec.duration_s);
      CHECK(vocab.index.count(rec.words[i].word) == 1);
    }
    // shape word matches the category
    const std::string shape = rec.category.substr(0, rec.category.find('_'));
    for (const auto& tw : rec.words) {
      if (tw.word == "circle" || tw.word == "square") CHECK(tw.word == shape);
    }
    // color words are truthful: the named color is on screen within 0.5 s
    const auto& meta = store.meta(rec.video_id);
    int color_mentions = 0;
    for (const auto& tw : rec.words) {
      for (const auto& [cname, rgb] : palette) {
        if (tw.word != cname) continue;
        ++color_mentions;
        const int fi = std::clamp(static_cast<int>(std::lround(tw.timestamp * meta.fps)), 0, meta.frame_count - 1);
        const auto& frame = store.frame(rec.video_id, fi);
        bool found = false;
        for (size_t px = 0; px + 2 < frame.size() && !found; px += 3) {
          found = frame[px] == rgb[0] && frame[px + 1] == rgb[1] && frame[px + 2] == rgb[2];
        }
        if (!found) {
          // word may sit up to 0.5 s from the state it describes; check neighbours
          for (int df : {-1, 1}) {
            const int fj = std::clamp(fi + df, 0, meta.frame_count - 1);
            const auto& f2 = store.frame(rec.video_id, fj);
            for (size_t px = 0; px + 2 < f2.size() && !found; px += 3) {
              found = f2[px] == rgb[0] && f2[px + 1] == rgb[1] && f2[px + 2] == rgb[2];
            }
          }
        }
        CHECK(found);
      }
    }
    CHECK(color_mentions > 0);

    // density: every 3 s window has >= 3 words
    for (double t0 = 0.0; t0 + 3.0 <= rec.duration_s; t0 += 0.5) {
      int n = 0;
      for (const auto& tw : rec.words) n += (tw.timestamp >= t0 && tw.timestamp <= t0 + 3.0);
      CHECK(n >= 3);
    }
  }

  // frame archive shape: zero-padded names, H*W*3 bytes
  const auto f0 = store.frame(m.videos[0].id, 0);
  CHECK(static_cast<int>(f0.size()) == m.videos[0].h * m.videos[0].w * 3);
  CHECK(m.videos[0].h == 37);  // 32 * 1.15 rounded
  CHECK(fs::exists(dir1 / "frames" / m.videos[0].id / "000000.rgb"));

  fs::remove_all(dir1);
  fs::remove_all(dir2);
}

TEST_CASE("generate_corpus rejects an unwritable path") {
  GenConfig cfg;
  cfg.count = 1;
  cfg.out_dir = "/proc/definitely/not/writable";
  CHECK_THROWS_AS(generate_corpus(cfg), IoError);
}
