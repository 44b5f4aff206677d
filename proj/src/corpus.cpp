#include "tvts/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "tvts/tokenizer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace tvts::corpus {

namespace {

constexpr int kNumShapes = 2;   // circle, square
constexpr int kNumMotions = 5;  // bounce_h, bounce_v, orbit_cw, orbit_ccw, zigzag
const char* kShapeNames[kNumShapes] = {"circle", "square"};
const char* kMotionNames[kNumMotions] = {"bounce_h", "bounce_v", "orbit_cw", "orbit_ccw", "zigzag"};

constexpr double kGridDt = 0.05;

struct Vec2 {
  double x = 0.0, y = 0.0;
};

// Per-video procedural scene sampled on a fine time grid; the narration and
// the renderer read the same grid so phrases are truthful by construction.
struct Scene {
  int shape = 0;
  int motion = 0;
  int bg_shade = 45;
  double size_frac = 0.2;
  std::vector<Vec2> pos;           // grid positions, normalized [0,1]^2
  std::vector<int> dir_label;      // 0 left, 1 right, 2 up, 3 down
  std::vector<double> turn_times;  // dominant-direction changes
  std::vector<double> color_switch_times;
  std::vector<int> color_ids;      // epoch colors; size = switches + 1
  double duration = 0.0;

  int grid_index(double t) const {
    const int i = static_cast<int>(std::lround(t / kGridDt));
    return std::clamp(i, 0, static_cast<int>(pos.size()) - 1);
  }
  int color_at(double t) const {
    size_t e = 0;
    while (e < color_switch_times.size() && color_switch_times[e] <= t) ++e;
    return color_ids[e];
  }
};

double tri01(double u) {
  const double f = u - std::floor(u);
  return f < 0.5 ? 2.0 * f : 2.0 * (1.0 - f);
}

Scene make_scene(int category, double duration, Rng& rng) {
  Scene sc;
  sc.shape = category / kNumMotions;
  sc.motion = category % kNumMotions;
  sc.duration = duration;
  sc.bg_shade = 38 + static_cast<int>(rng.below(18));
  sc.size_frac = rng.uniform(0.18, 0.23);
  const double margin = sc.size_frac + 0.03;
  const int n = static_cast<int>(std::lround(duration / kGridDt)) + 1;
  sc.pos.resize(static_cast<size_t>(n));

  const double lo = margin, hi = 1.0 - margin;
  auto clamp_box = [&](double v) { return std::clamp(v, lo, hi); };

  switch (sc.motion) {
    case 0: {  // bounce_h
      const double period = rng.uniform(16.0, 26.0), phase = rng.uniform01();
      const double y0 = rng.uniform(lo, hi);
      for (int i = 0; i < n; ++i) {
        const double t = i * kGridDt;
        sc.pos[static_cast<size_t>(i)] = {lo + (hi - lo) * tri01(phase + t / period), y0};
      }
      break;
    }
    case 1: {  // bounce_v
      const double period = rng.uniform(16.0, 26.0), phase = rng.uniform01();
      const double x0 = rng.uniform(lo, hi);
      for (int i = 0; i < n; ++i) {
        const double t = i * kGridDt;
        sc.pos[static_cast<size_t>(i)] = {x0, lo + (hi - lo) * tri01(phase + t / period)};
      }
      break;
    }
    case 2:
    case 3: {  // orbit, cw = 2 (screen-wise), ccw = 3
      const double r = std::min(0.5 - margin, rng.uniform(0.24, 0.34));
      const double period = rng.uniform(18.0, 30.0), phase = rng.uniform01();
      const double sign = sc.motion == 2 ? 1.0 : -1.0;  // y grows downward
      for (int i = 0; i < n; ++i) {
        const double t = i * kGridDt;
        const double a = 2.0 * M_PI * (phase + sign * t / period);
        sc.pos[static_cast<size_t>(i)] = {0.5 + r * std::cos(a), 0.5 + r * std::sin(a)};
      }
      break;
    }
    default: {  // zigzag: random piecewise headings with wall reflection
      Vec2 p{rng.uniform(lo, hi), rng.uniform(lo, hi)};
      double ang = rng.uniform(0.0, 2.0 * M_PI);
      const double speed = rng.uniform(0.09, 0.14);
      double next_turn = rng.uniform(2.5, 5.5);
      for (int i = 0; i < n; ++i) {
        sc.pos[static_cast<size_t>(i)] = p;
        const double t = i * kGridDt;
        if (t >= next_turn) {
          ang = rng.uniform(0.0, 2.0 * M_PI);
          next_turn = t + rng.uniform(2.5, 5.5);
        }
        double nx = p.x + std::cos(ang) * speed * kGridDt;
        double ny = p.y + std::sin(ang) * speed * kGridDt;
        if (nx < lo || nx > hi) {
          ang = M_PI - ang;
          nx = clamp_box(nx);
        }
        if (ny < lo || ny > hi) {
          ang = -ang;
          ny = clamp_box(ny);
        }
        p = {nx, ny};
      }
      break;
    }
  }

  // dominant direction labels and turn events from the grid
  sc.dir_label.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int a = std::max(i - 1, 0), b = std::min(i + 1, n - 1);
    const double vx = sc.pos[static_cast<size_t>(b)].x - sc.pos[static_cast<size_t>(a)].x;
    const double vy = sc.pos[static_cast<size_t>(b)].y - sc.pos[static_cast<size_t>(a)].y;
    sc.dir_label[static_cast<size_t>(i)] =
        std::fabs(vx) >= std::fabs(vy) ? (vx < 0.0 ? 0 : 1) : (vy < 0.0 ? 2 : 3);
  }
  for (int i = 1; i < n; ++i) {
    if (sc.dir_label[static_cast<size_t>(i)] != sc.dir_label[static_cast<size_t>(i - 1)]) {
      sc.turn_times.push_back(i * kGridDt);
    }
  }

  // color epochs; successive colors always differ
  const int palette_n = static_cast<int>(color_palette().size());
  int c = static_cast<int>(rng.below(static_cast<uint64_t>(palette_n)));
  sc.color_ids.push_back(c);
  double t = 0.0;
  for (;;) {
    t += rng.uniform(3.5, 7.0);
    if (t >= duration) break;
    const int step = 1 + static_cast<int>(rng.below(static_cast<uint64_t>(palette_n - 1)));
    c = (c + step) % palette_n;
    sc.color_switch_times.push_back(t);
    sc.color_ids.push_back(c);
  }
  return sc;
}

// ------------------------------------------------------------------ narration

const char* kDirWords[4] = {"left", "right", "up", "down"};

std::vector<std::string> region_words(const Vec2& p) {
  const int col = p.x < 1.0 / 3.0 ? 0 : (p.x < 2.0 / 3.0 ? 1 : 2);
  const int row = p.y < 1.0 / 3.0 ? 0 : (p.y < 2.0 / 3.0 ? 1 : 2);
  if (row == 1 && col == 1) return {"center"};
  if (row == 1) return {col == 0 ? "left" : "right", "edge"};
  if (col == 1) return {row == 0 ? "top" : "bottom", "edge"};
  return {row == 0 ? "top" : "bottom", col == 0 ? "left" : "right", "corner"};
}

struct Emission {
  double t = 0.0;
  std::vector<std::string> words;
};

std::vector<Emission> narrate(const Scene& sc, const GenConfig& cfg, Rng& rng) {
  const std::string shape = kShapeNames[sc.shape];
  const auto& palette = color_palette();

  auto near_event = [&](const std::vector<double>& ts, double t, double tol) {
    for (double e : ts) {
      if (std::fabs(e - t) <= tol) return true;
    }
    return false;
  };

  // The state behind a phrase is evaluated at the timestamp of the word that
  // carries it (the color/direction/region word), keeping every word truthful
  // well inside the +/- 0.5 s budget.
  auto color_at_offset = [&](double t, size_t word_index) {
    return palette[static_cast<size_t>(sc.color_at(t + static_cast<double>(word_index) * cfg.word_spacing_s))].first;
  };
  auto dir_at_offset = [&](double t, size_t word_index) {
    const int gi = sc.grid_index(t + static_cast<double>(word_index) * cfg.word_spacing_s);
    return std::string(kDirWords[sc.dir_label[static_cast<size_t>(gi)]]);
  };

  std::vector<Emission> out;
  double t = rng.uniform(0.2, 0.6);
  while (t + 0.15 < sc.duration) {
    const bool turn_near = near_event(sc.turn_times, t, 0.45);
    const bool switch_near = near_event(sc.color_switch_times, t, 0.45);

    double wc = cfg.w_color, wd = cfg.w_direction, wr = cfg.w_region,
           we = (turn_near || switch_near) ? cfg.w_event : 0.0;
    const double total = wc + wd + wr + we;
    const double roll = rng.uniform01() * total;
    std::vector<std::string> words;
    if (roll < wc) {
      switch (rng.below(3)) {
        case 0: words = {"the", shape, "is", color_at_offset(t, 3), "now"}; break;
        case 1: words = {"it", "looks", color_at_offset(t, 2), "now"}; break;
        default: words = {"the", color_at_offset(t, 1), shape, "keeps", "moving"}; break;
      }
    } else if (roll < wc + wd) {
      switch (rng.below(3)) {
        case 0: words = {"it", "is", "moving", dir_at_offset(t, 3)}; break;
        case 1: words = {"the", shape, "moves", dir_at_offset(t, 3)}; break;
        default: words = {"still", "moving", dir_at_offset(t, 2)}; break;
      }
    } else if (roll < wc + wd + wr) {
      const bool v0 = rng.below(2) == 0;
      words = v0 ? std::vector<std::string>{"it", "is", "near", "the"}
                 : std::vector<std::string>{"the", shape, "is", "at", "the"};
      const int gi = sc.grid_index(t + static_cast<double>(words.size()) * cfg.word_spacing_s);
      const auto region = region_words(sc.pos[static_cast<size_t>(gi)]);
      words.insert(words.end(), region.begin(), region.end());
    } else if (switch_near && (!turn_near || rng.below(2) == 0)) {
      words = rng.below(2) == 0
                  ? std::vector<std::string>{"the", shape, "turns", color_at_offset(t, 3), "now"}
                  : std::vector<std::string>{"it", "turns", color_at_offset(t, 2)};
    } else {
      switch (rng.below(3)) {
        case 0: words = {"now", "it", "turns", "around"}; break;
        case 1: words = {"it", "changes", "direction", "now"}; break;
        default: words = {"it", "bounces", "off", "the", "edge"}; break;
      }
    }

    double phrase_span = static_cast<double>(words.size() - 1) * cfg.word_spacing_s;
    if (t + phrase_span > sc.duration - 0.05) {
      words = {"it", "looks", color_at_offset(t, 2), "now"};  // short fallback near the end
      phrase_span = static_cast<double>(words.size() - 1) * cfg.word_spacing_s;
      if (t + phrase_span > sc.duration - 0.05) break;
    }
    Emission e;
    e.t = t;
    e.words = std::move(words);
    out.push_back(std::move(e));
    // long phrases push the next emission so word times stay increasing
    t += std::max(rng.uniform(cfg.phrase_interval_lo, cfg.phrase_interval_hi), phrase_span + 0.2);
  }
  return out;
}

// ------------------------------------------------------------------ rendering

void render_frame(const Scene& sc, double t, int h, int w, std::vector<uint8_t>& buf) {
  buf.assign(static_cast<size_t>(h) * w * 3, static_cast<uint8_t>(sc.bg_shade));
  const int gi = sc.grid_index(t);
  const Vec2 p = sc.pos[static_cast<size_t>(gi)];
  const auto rgb = color_palette()[static_cast<size_t>(sc.color_at(t))].second;
  const double cx = p.x * (w - 1), cy = p.y * (h - 1);
  const double r = sc.size_frac * std::min(h, w);
  const double half_side = r * 0.9;  // square trimmed to roughly match circle area
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - r - 1)));
  const int y1 = std::min(h - 1, static_cast<int>(std::ceil(cy + r + 1)));
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - r - 1)));
  const int x1 = std::min(w - 1, static_cast<int>(std::ceil(cx + r + 1)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double dx = x - cx, dy = y - cy;
      const bool inside = sc.shape == 0 ? (dx * dx + dy * dy <= r * r)
                                        : (std::fabs(dx) <= half_side && std::fabs(dy) <= half_side);
      if (inside) {
        uint8_t* px = buf.data() + (static_cast<size_t>(y) * w + x) * 3;
        px[0] = rgb[0];
        px[1] = rgb[1];
        px[2] = rgb[2];
      }
    }
  }
}

std::string frame_name(int index) {
  char b[16];
  std::snprintf(b, sizeof b, "%06d.rgb", index);
  return b;
}

double round_ms(double t) { return std::round(t * 1000.0) / 1000.0; }

}  // namespace

const std::vector<std::string>& category_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (int s = 0; s < kNumShapes; ++s) {
      for (int m = 0; m < kNumMotions; ++m) v.push_back(std::string(kShapeNames[s]) + "_" + kMotionNames[m]);
    }
    return v;
  }();
  return names;
}

const std::vector<std::pair<std::string, std::array<uint8_t, 3>>>& color_palette() {
  static const std::vector<std::pair<std::string, std::array<uint8_t, 3>>> p = {
      {"red", {220, 45, 45}},   {"green", {50, 200, 70}},  {"blue", {55, 95, 230}},
      {"yellow", {235, 220, 60}}, {"purple", {170, 60, 220}}, {"orange", {240, 140, 35}},
  };
  return p;
}

void generate_corpus(const GenConfig& cfg) {
  if (cfg.count < 1) throw ConfigError("gen-data: count must be >= 1");
  if (cfg.fps <= 0.0 || cfg.duration_s <= 1.0) throw ConfigError("gen-data: bad fps/duration");
  if (cfg.out_dir.empty()) throw ConfigError("gen-data: output directory required");

  const int render_h = static_cast<int>(std::lround(cfg.res_h * cfg.render_scale));
  const int render_w = static_cast<int>(std::lround(cfg.res_w * cfg.render_scale));
  const int frames_per_video = static_cast<int>(std::lround(cfg.duration_s * cfg.fps));

  std::error_code ec;
  fs::create_directories(fs::path(cfg.out_dir) / "frames", ec);
  if (ec) throw IoError("gen-data: cannot create output directory '" + cfg.out_dir + "': " + ec.message());

  const Vocab vocab = builtin_vocab();
  const auto& cats = category_names();

  Manifest manifest;
  manifest.render_scale = cfg.render_scale;
  manifest.base_h = cfg.res_h;
  manifest.base_w = cfg.res_w;
  manifest.fps = cfg.fps;

  std::ofstream tf(fs::path(cfg.out_dir) / "transcripts.jsonl", std::ios::binary | std::ios::trunc);
  if (!tf) throw IoError("gen-data: cannot open transcripts.jsonl for writing");

  std::vector<uint8_t> frame_buf;
  for (int vi = 0; vi < cfg.count; ++vi) {
    Rng rng = Rng::derive(cfg.seed, "video", static_cast<uint64_t>(vi));
    const int cat = vi % static_cast<int>(cats.size());  // stratified by construction
    const Scene sc = make_scene(cat, cfg.duration_s, rng);

    char idbuf[16];
    std::snprintf(idbuf, sizeof idbuf, "v%06d", vi);
    const std::string id = idbuf;

    const fs::path vdir = fs::path(cfg.out_dir) / "frames" / id;
    fs::create_directories(vdir, ec);
    if (ec) throw IoError("gen-data: cannot create '" + vdir.string() + "'");
    for (int f = 0; f < frames_per_video; ++f) {
      render_frame(sc, static_cast<double>(f) / cfg.fps, render_h, render_w, frame_buf);
      std::ofstream ff(vdir / frame_name(f), std::ios::binary | std::ios::trunc);
      if (!ff) throw IoError("gen-data: cannot open frame file in '" + vdir.string() + "'");
      ff.write(reinterpret_cast<const char*>(frame_buf.data()), static_cast<std::streamsize>(frame_buf.size()));
      if (!ff) throw IoError("gen-data: short write in '" + vdir.string() + "'");
    }

    const auto emissions = narrate(sc, cfg, rng);
    json words = json::array();
    int word_count = 0;
    for (const auto& e : emissions) {
      for (size_t wi = 0; wi < e.words.size(); ++wi) {
        if (vocab.index.find(e.words[wi]) == vocab.index.end()) {
          throw ContractError("generator emitted out-of-vocabulary word '" + e.words[wi] + "'");
        }
        const double ts = round_ms(e.t + static_cast<double>(wi) * cfg.word_spacing_s);
        words.push_back(json{{"w", e.words[wi]}, {"s", ts}});
        ++word_count;
      }
    }
    (void)word_count;

    // emission pacing guarantee: every check_window_s window holds enough words
    for (double t0 = 0.0; t0 + cfg.check_window_s <= cfg.duration_s; t0 += 0.25) {
      int in_window = 0;
      for (const auto& wj : words) {
        const double s = wj.at("s").get<double>();
        if (s >= t0 && s <= t0 + cfg.check_window_s) ++in_window;
      }
      if (in_window < cfg.min_words_per_window) {
        throw ContractError("narration density violated at t=" + std::to_string(t0) + " for " + id);
      }
    }

    json rec{{"video_id", id},
             {"duration_s", cfg.duration_s},
             {"category", cats[static_cast<size_t>(cat)]},
             {"words", words}};
    tf << rec.dump() << "\n";
    if (!tf) throw IoError("gen-data: transcript write failed");

    VideoMeta meta;
    meta.id = id;
    meta.fps = cfg.fps;
    meta.h = render_h;
    meta.w = render_w;
    meta.frame_count = frames_per_video;
    meta.category = cats[static_cast<size_t>(cat)];
    meta.duration_s = cfg.duration_s;
    manifest.videos.push_back(meta);
  }
  tf.close();

  json mj{{"format_version", manifest.format_version},
          {"render_scale", manifest.render_scale},
          {"base_res", json::array({manifest.base_h, manifest.base_w})},
          {"fps", manifest.fps}};
  json vids = json::array();
  for (const auto& v : manifest.videos) {
    vids.push_back(json{{"id", v.id},
                        {"fps", v.fps},
                        {"h", v.h},
                        {"w", v.w},
                        {"count", v.frame_count},
                        {"category", v.category},
                        {"duration_s", v.duration_s}});
  }
  mj["videos"] = vids;
  std::ofstream mf(fs::path(cfg.out_dir) / "manifest.json", std::ios::binary | std::ios::trunc);
  if (!mf) throw IoError("gen-data: cannot open manifest.json for writing");
  mf << mj.dump(2) << "\n";
  if (!mf) throw IoError("gen-data: manifest write failed");
}

Manifest load_manifest(const std::string& dir) {
  std::ifstream f(fs::path(dir) / "manifest.json", std::ios::binary);
  if (!f) throw IoError("cannot open manifest.json under '" + dir + "'");
  json mj;
  try {
    f >> mj;
  } catch (const json::exception& e) {
    throw DataError(std::string("manifest.json parse error: ") + e.what());
  }
  Manifest m;
  m.format_version = mj.at("format_version").get<int>();
  m.render_scale = mj.at("render_scale").get<double>();
  m.base_h = mj.at("base_res").at(0).get<int>();
  m.base_w = mj.at("base_res").at(1).get<int>();
  m.fps = mj.at("fps").get<double>();
  for (const auto& v : mj.at("videos")) {
    VideoMeta meta;
    meta.id = v.at("id").get<std::string>();
    meta.fps = v.at("fps").get<double>();
    meta.h = v.at("h").get<int>();
    meta.w = v.at("w").get<int>();
    meta.frame_count = v.at("count").get<int>();
    meta.category = v.at("category").get<std::string>();
    meta.duration_s = v.at("duration_s").get<double>();
    m.videos.push_back(std::move(meta));
  }
  return m;
}

std::vector<TranscriptRecord> load_transcripts(const std::string& dir) {
  std::ifstream f(fs::path(dir) / "transcripts.jsonl", std::ios::binary);
  if (!f) throw IoError("cannot open transcripts.jsonl under '" + dir + "'");
  std::vector<TranscriptRecord> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError(std::string("transcripts.jsonl parse error: ") + e.what());
    }
    TranscriptRecord tr;
    tr.video_id = rec.at("video_id").get<std::string>();
    tr.duration_s = rec.at("duration_s").get<double>();
    tr.category = rec.at("category").get<std::string>();
    for (const auto& wj : rec.at("words")) {
      tr.words.push_back(TimedWord{wj.at("w").get<std::string>(), wj.at("s").get<double>()});
    }
    out.push_back(std::move(tr));
  }
  return out;
}

uint64_t manifest_hash(const std::string& dir) {
  std::ifstream f(fs::path(dir) / "manifest.json", std::ios::binary);
  if (!f) throw IoError("cannot open manifest.json under '" + dir + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  const std::string bytes = ss.str();
  return fnv1a64(bytes.data(), bytes.size());
}

FrameStore::FrameStore(std::string dir, const Manifest& manifest) : dir_(std::move(dir)) {
  for (const auto& v : manifest.videos) meta_[v.id] = v;
}

const VideoMeta& FrameStore::meta(const std::string& video_id) const {
  const auto it = meta_.find(video_id);
  if (it == meta_.end()) throw DataError("unknown video id '" + video_id + "'");
  return it->second;
}

const std::vector<uint8_t>& FrameStore::frame(const std::string& video_id, int index) const {
  const VideoMeta& m = meta(video_id);
  if (index < 0 || index >= m.frame_count) {
    throw RangeError("frame index " + std::to_string(index) + " out of range for " + video_id);
  }
  auto& frames = cache_[video_id];
  if (frames.empty()) frames.resize(static_cast<size_t>(m.frame_count));
  auto& slot = frames[static_cast<size_t>(index)];
  if (slot.empty()) {
    const fs::path p = fs::path(dir_) / "frames" / video_id / frame_name(index);
    std::ifstream f(p, std::ios::binary);
    if (!f) throw IoError("cannot open frame '" + p.string() + "'");
    slot.assign(static_cast<size_t>(m.h) * m.w * 3, 0);
    f.read(reinterpret_cast<char*>(slot.data()), static_cast<std::streamsize>(slot.size()));
    if (f.gcount() != static_cast<std::streamsize>(slot.size())) {
      throw DataError("frame '" + p.string() + "' truncated");
    }
  }
  return slot;
}

}  // namespace tvts::corpus
