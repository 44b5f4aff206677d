#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "tvts/common.hpp"
#include "tvts/rng.hpp"

namespace tvts::corpus {

struct TimedWord {
  std::string word;
  double timestamp = 0.0;  // seconds
};

// One video's ASR-style stream plus its evaluation label.
struct TranscriptRecord {
  std::string video_id;
  double duration_s = 0.0;
  std::string category;
  std::vector<TimedWord> words;  // nondecreasing timestamps
};

struct VideoMeta {
  std::string id;
  double fps = 0.0;
  int h = 0, w = 0;  // stored (rendered) frame resolution
  int frame_count = 0;
  std::string category;
  double duration_s = 0.0;
};

struct Manifest {
  int format_version = 1;
  double render_scale = 1.15;
  int base_h = 0, base_w = 0;  // model-facing resolution the frames were rendered for
  double fps = 0.0;
  std::vector<VideoMeta> videos;
};

struct GenConfig {
  std::string out_dir;
  int count = 100;
  uint64_t seed = 1;
  double fps = 2.0;
  int res_h = 32, res_w = 32;   // model-facing; stored frames are render_scale larger
  double render_scale = 1.15;   // crop headroom for RandomCrop augmentation
  double duration_s = 20.0;
  // narration pacing; interval <= 1.25s guarantees >= min_words in any l=3s window
  double phrase_interval_lo = 0.80;
  double phrase_interval_hi = 1.10;
  double word_spacing_s = 0.18;
  double color_period_lo = 3.5;  // seconds between color switches
  double color_period_hi = 7.0;
  int min_words_per_window = 3;
  double check_window_s = 3.0;
  // phrase type mix (normalized internally)
  double w_color = 0.40, w_direction = 0.25, w_region = 0.14, w_event = 0.21;
};

// 10 categories = {circle, square} x {bounce_h, bounce_v, orbit_cw, orbit_ccw, zigzag}
const std::vector<std::string>& category_names();
// name -> RGB used by the renderer; exposed for truthfulness tests
const std::vector<std::pair<std::string, std::array<uint8_t, 3>>>& color_palette();

// Writes frames/<id>/%06d.rgb, transcripts.jsonl and manifest.json under
// cfg.out_dir. Deterministic for identical (cfg, seed).
void generate_corpus(const GenConfig& cfg);

Manifest load_manifest(const std::string& dir);
std::vector<TranscriptRecord> load_transcripts(const std::string& dir);
uint64_t manifest_hash(const std::string& dir);  // FNV-1a of manifest.json bytes

// Raw 8-bit frames, cached per video after first touch.
class FrameStore {
 public:
  FrameStore() = default;
  FrameStore(std::string dir, const Manifest& manifest);

  const VideoMeta& meta(const std::string& video_id) const;
  // h*w*3 bytes, row-major
  const std::vector<uint8_t>& frame(const std::string& video_id, int index) const;

 private:
  std::string dir_;
  std::unordered_map<std::string, VideoMeta> meta_;
  mutable std::unordered_map<std::string, std::vector<std::vector<uint8_t>>> cache_;
};

}  // namespace tvts::corpus
