#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "ehi/error.hpp"
#include "ehi/synthgen.hpp"

namespace ehi::synth {

using corpus::Place;

std::string_view to_string(PathFamily p) noexcept {
  switch (p) {
    case PathFamily::linear: return "linear";
    case PathFamily::circle: return "circle";
    case PathFamily::zigzag: return "zigzag";
    case PathFamily::figure8: return "figure8";
  }
  return "linear";
}

std::string_view to_string(PoseSchedule p) noexcept {
  switch (p) {
    case PoseSchedule::steady: return "steady";
    case PoseSchedule::open_close: return "open_close";
    case PoseSchedule::rotate: return "rotate";
    case PoseSchedule::wave: return "wave";
  }
  return "steady";
}

PathFamily parse_path_family(std::string_view s) {
  for (auto p : {PathFamily::linear, PathFamily::circle, PathFamily::zigzag, PathFamily::figure8}) {
    if (to_string(p) == s) return p;
  }
  throw Error(ErrorCode::config, "unknown path family '" + std::string(s) + "'");
}

PoseSchedule parse_pose_schedule(std::string_view s) {
  for (auto p : {PoseSchedule::steady, PoseSchedule::open_close, PoseSchedule::rotate, PoseSchedule::wave}) {
    if (to_string(p) == s) return p;
  }
  throw Error(ErrorCode::config, "unknown pose schedule '" + std::string(s) + "'");
}

GestureScript default_gesture(int gesture_id) {
  const int k = gesture_id - 1;
  GestureScript g;
  g.gesture_id = gesture_id;
  g.path = static_cast<PathFamily>(((k % 4) + 4) % 4);
  g.pose = static_cast<PoseSchedule>(((k / 4) % 4 + 4) % 4);
  g.direction_deg = std::fmod(37.0 * k, 180.0);
  g.amplitude = 0.18;
  g.base_length = 24;
  return g;
}

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw Error(ErrorCode::config, msg);
}

}  // namespace

void validate(const SynthConfig& cfg) {
  require(!cfg.subjects.empty(), "synth config: at least one subject required");
  require(!cfg.gestures.empty(), "synth config: at least one gesture required");
  require(cfg.repeats_per_cell >= 1, "synth config: repeats_per_cell must be >= 1");
  require(!cfg.places.empty(), "synth config: at least one place required");
  require(cfg.frame_height >= 32 && cfg.frame_width >= 32, "synth config: frame size must be at least 32x32");
  require(cfg.length_jitter_min <= cfg.length_jitter_max, "synth config: length_jitter_min > length_jitter_max");
  require(cfg.gray_level - cfg.texture_amplitude - cfg.chroma - 4 >= 0 &&
              cfg.gray_level + cfg.texture_amplitude + cfg.chroma + 4 <= 255,
          "synth config: gray_level/texture_amplitude/chroma leave the 8-bit range");
  for (std::size_t i = 0; i < cfg.subjects.size(); ++i) {
    const auto& s = cfg.subjects[i];
    const std::string at = "synth config: subject " + std::to_string(i + 1) + ": ";
    require(s.shape_scale > 0, at + "shape_scale must be positive");
    require(s.aspect > 0, at + "aspect must be positive");
    require(s.depth_offset_mm >= 300 && s.depth_offset_mm <= 800, at + "depth_offset_mm must be in [300, 800]");
    const double rim = s.depth_offset_mm + s.depth_curvature;
    require(rim >= 300 && rim <= 800, at + "depth_offset_mm + depth_curvature must be in [300, 800]");
    require(s.texture_freq > 0, at + "texture_freq must be positive");
    require(s.texture_phase >= 0 && s.texture_phase < 2 * std::numbers::pi, at + "texture_phase must be in [0, 2pi)");
    require(s.hue_deg >= 0 && s.hue_deg < 360, at + "hue_deg must be in [0, 360)");
    require(s.tempo > 0, at + "tempo must be positive");
  }
  std::vector<int> ids;
  for (const auto& g : cfg.gestures) {
    require(g.gesture_id >= 1, "synth config: gesture ids must be >= 1");
    require(g.base_length >= 1, "synth config: gesture base_length must be >= 1");
    require(g.amplitude >= 0, "synth config: gesture amplitude must be >= 0");
    ids.push_back(g.gesture_id);
  }
  std::sort(ids.begin(), ids.end());
  require(std::adjacent_find(ids.begin(), ids.end()) == ids.end(), "synth config: duplicate gesture id");
}

std::vector<std::string_view> preset_names() {
  return {"clean", "confounded", "hue-only", "shape-only", "depth-only", "texture-only"};
}

SynthConfig make_preset(std::string_view name, const PresetParams& params) {
  require(params.subjects >= 1 && params.gestures >= 1 && params.repeats >= 1,
          "synth preset: subjects, gestures and repeats must be >= 1");
  SynthConfig cfg;
  cfg.preset = std::string(name);
  cfg.seed = params.seed;
  cfg.repeats_per_cell = params.repeats;
  for (int g = 1; g <= params.gestures; ++g) cfg.gestures.push_back(default_gesture(g));

  const int n = params.subjects;
  auto frac = [n](int i) { return (i + 0.5) / n; };
  const SubjectSignature base;
  cfg.subjects.assign(static_cast<std::size_t>(n), base);

  if (name == "hue-only") {
    for (int i = 0; i < n; ++i) cfg.subjects[i].hue_deg = std::fmod(15.0 + 360.0 * i / n, 360.0);
  } else if (name == "shape-only") {
    for (int i = 0; i < n; ++i) {
      cfg.subjects[i].shape_scale = 0.7 + 0.6 * frac(i);
      cfg.subjects[i].aspect = 0.65 + 0.8 * frac(n - 1 - i);
    }
  } else if (name == "depth-only") {
    for (int i = 0; i < n; ++i) {
      cfg.subjects[i].depth_offset_mm = 330.0 + 400.0 * frac(i);
      cfg.subjects[i].depth_curvature = 20.0 + 80.0 * frac(n - 1 - i);
    }
  } else if (name == "texture-only") {
    for (int i = 0; i < n; ++i) {
      cfg.subjects[i].texture_freq = 0.07 + 0.12 * frac(i);
      cfg.subjects[i].texture_phase = 2 * std::numbers::pi * frac(n - 1 - i);
    }
  } else if (name == "clean" || name == "confounded") {
    // Every factor varies; each factor's stratified grid gets its own
    // seeded permutation so factors are not collinear across subjects.
    std::mt19937_64 rng(params.seed * 0x9e3779b97f4a7c15ULL + 17);
    auto perm = [&] {
      std::vector<int> p(static_cast<std::size_t>(n));
      std::iota(p.begin(), p.end(), 0);
      std::shuffle(p.begin(), p.end(), rng);
      return p;
    };
    const auto p_hue = perm(), p_scale = perm(), p_aspect = perm(), p_depth = perm(),
               p_tex = perm(), p_tempo = perm();
    for (int i = 0; i < n; ++i) {
      auto& s = cfg.subjects[i];
      s.hue_deg = std::fmod(15.0 + 360.0 * p_hue[i] / n, 360.0);
      s.shape_scale = 0.8 + 0.4 * frac(p_scale[i]);
      s.aspect = 0.8 + 0.45 * frac(p_aspect[i]);
      s.depth_offset_mm = 350.0 + 350.0 * frac(p_depth[i]);
      s.depth_curvature = 60.0;
      s.texture_freq = 0.07 + 0.12 * frac(p_tex[i]);
      s.texture_phase = 2 * std::numbers::pi * frac(p_tex[n - 1 - i]);
      s.tempo = 0.8 + 0.5 * frac(p_tempo[i]);
    }
    cfg.background = name == "confounded" ? BackgroundMode::confounded : BackgroundMode::clean;
  } else {
    throw Error(ErrorCode::config, "unknown synth preset '" + std::string(name) + "'");
  }
  return cfg;
}

namespace {

std::string fmt_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::vector<Place> parse_places(const std::string& text) {
  std::vector<Place> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(' '));
    item.erase(item.find_last_not_of(' ') + 1);
    try {
      out.push_back(corpus::parse_place(item));
    } catch (const Error& e) {
      throw Error(ErrorCode::config, std::string("corpus.places: ") + e.what());
    }
  }
  return out;
}

BackgroundMode parse_background(const std::string& s) {
  if (s == "clean") return BackgroundMode::clean;
  if (s == "confounded") return BackgroundMode::confounded;
  throw Error(ErrorCode::config, "corpus.background: unknown mode '" + s + "'");
}

}  // namespace

SynthConfig config_from_kv(const kv::Document& doc) {
  for (const auto& s : doc.sections) {
    if (s.name != "corpus" && s.name != "subject" && s.name != "gesture") {
      throw Error(ErrorCode::config, "unknown config section '" + s.name + "'");
    }
  }
  kv::SectionReader corpus(doc.first("corpus"), "corpus");
  PresetParams pp;
  pp.subjects = static_cast<int>(corpus.integer("subjects", pp.subjects));
  pp.gestures = static_cast<int>(corpus.integer("gestures", pp.gestures));
  pp.repeats = static_cast<int>(corpus.integer("repeats_per_cell", pp.repeats));
  pp.seed = static_cast<std::uint64_t>(corpus.integer("seed", static_cast<long long>(pp.seed)));
  const auto preset = corpus.str("preset");
  const auto subject_sections = doc.all("subject");
  const auto gesture_sections = doc.all("gesture");
  if (!preset && subject_sections.empty()) {
    throw Error(ErrorCode::config, "synth config needs corpus.preset or at least one [subject] section");
  }
  SynthConfig cfg = make_preset(preset.value_or("clean"), pp);
  if (!preset) cfg.preset.clear();

  if (auto v = corpus.str("places")) cfg.places = parse_places(*v);
  if (auto v = corpus.str("background")) cfg.background = parse_background(*v);
  cfg.frame_height = static_cast<int>(corpus.integer("frame_height", cfg.frame_height));
  cfg.frame_width = static_cast<int>(corpus.integer("frame_width", cfg.frame_width));
  cfg.length_jitter_min = static_cast<int>(corpus.integer("length_jitter_min", cfg.length_jitter_min));
  cfg.length_jitter_max = static_cast<int>(corpus.integer("length_jitter_max", cfg.length_jitter_max));
  cfg.gray_level = static_cast<int>(corpus.integer("gray_level", cfg.gray_level));
  cfg.chroma = static_cast<int>(corpus.integer("chroma", cfg.chroma));
  cfg.texture_amplitude = corpus.real("texture_amplitude", cfg.texture_amplitude);
  corpus.finish();

  if (!subject_sections.empty()) {
    cfg.subjects.clear();
    for (std::size_t i = 0; i < subject_sections.size(); ++i) {
      kv::SectionReader r(subject_sections[i], "subject[" + std::to_string(i) + "]");
      SubjectSignature s;
      s.shape_scale = r.real("shape_scale", s.shape_scale);
      s.aspect = r.real("aspect", s.aspect);
      s.depth_offset_mm = r.real("depth_offset_mm", s.depth_offset_mm);
      s.depth_curvature = r.real("depth_curvature", s.depth_curvature);
      s.texture_freq = r.real("texture_freq", s.texture_freq);
      s.texture_phase = r.real("texture_phase", s.texture_phase);
      s.hue_deg = r.real("hue_deg", s.hue_deg);
      s.tempo = r.real("tempo", s.tempo);
      r.finish();
      cfg.subjects.push_back(s);
    }
  }
  if (!gesture_sections.empty()) {
    cfg.gestures.clear();
    for (std::size_t i = 0; i < gesture_sections.size(); ++i) {
      kv::SectionReader r(gesture_sections[i], "gesture[" + std::to_string(i) + "]");
      const auto id = r.str("id");
      if (!id) throw Error(ErrorCode::config, "gesture[" + std::to_string(i) + "].id is required");
      GestureScript g = default_gesture(static_cast<int>(kv::parse_integer(*id, "gesture.id")));
      if (auto v = r.str("path")) g.path = parse_path_family(*v);
      if (auto v = r.str("pose")) g.pose = parse_pose_schedule(*v);
      g.direction_deg = r.real("direction_deg", g.direction_deg);
      g.amplitude = r.real("amplitude", g.amplitude);
      g.base_length = static_cast<int>(r.integer("base_length", g.base_length));
      r.finish();
      cfg.gestures.push_back(g);
    }
  }
  validate(cfg);
  return cfg;
}

SynthConfig load_config(const std::filesystem::path& path) { return config_from_kv(kv::load(path)); }

kv::Document config_to_kv(const SynthConfig& cfg) {
  kv::Document doc;
  auto& c = doc.ensure("corpus");
  if (!cfg.preset.empty()) c.set("preset", cfg.preset);
  c.set("repeats_per_cell", std::to_string(cfg.repeats_per_cell));
  std::string places;
  for (auto p : cfg.places) places += (places.empty() ? "" : ",") + std::string(corpus::to_string(p));
  c.set("places", places);
  c.set("background", cfg.background == BackgroundMode::clean ? "clean" : "confounded");
  c.set("frame_height", std::to_string(cfg.frame_height));
  c.set("frame_width", std::to_string(cfg.frame_width));
  c.set("length_jitter_min", std::to_string(cfg.length_jitter_min));
  c.set("length_jitter_max", std::to_string(cfg.length_jitter_max));
  c.set("seed", std::to_string(cfg.seed));
  c.set("gray_level", std::to_string(cfg.gray_level));
  c.set("chroma", std::to_string(cfg.chroma));
  c.set("texture_amplitude", fmt_real(cfg.texture_amplitude));
  for (const auto& s : cfg.subjects) {
    kv::Section sec{"subject", {}, 0};
    sec.set("shape_scale", fmt_real(s.shape_scale));
    sec.set("aspect", fmt_real(s.aspect));
    sec.set("depth_offset_mm", fmt_real(s.depth_offset_mm));
    sec.set("depth_curvature", fmt_real(s.depth_curvature));
    sec.set("texture_freq", fmt_real(s.texture_freq));
    sec.set("texture_phase", fmt_real(s.texture_phase));
    sec.set("hue_deg", fmt_real(s.hue_deg));
    sec.set("tempo", fmt_real(s.tempo));
    doc.sections.push_back(std::move(sec));
  }
  for (const auto& g : cfg.gestures) {
    kv::Section sec{"gesture", {}, 0};
    sec.set("id", std::to_string(g.gesture_id));
    sec.set("path", std::string(to_string(g.path)));
    sec.set("pose", std::string(to_string(g.pose)));
    sec.set("direction_deg", fmt_real(g.direction_deg));
    sec.set("amplitude", fmt_real(g.amplitude));
    sec.set("base_length", std::to_string(g.base_length));
    doc.sections.push_back(std::move(sec));
  }
  return doc;
}

std::uint64_t cell_seed(std::uint64_t corpus_seed, int gesture_id, Place place, int repeat) {
  std::uint64_t h = corpus_seed * 0x9e3779b97f4a7c15ULL;
  for (std::uint64_t v : {static_cast<std::uint64_t>(gesture_id),
                          static_cast<std::uint64_t>(place == Place::indoor ? 1 : 2),
                          static_cast<std::uint64_t>(repeat)}) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h *= 0xff51afd7ed558ccdULL;
    h ^= h >> 33;
  }
  return h;
}

int cell_length(const SynthConfig& cfg, const GestureScript& script, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x1e9917ULL);
  std::uniform_int_distribution<int> jitter(cfg.length_jitter_min, cfg.length_jitter_max);
  return std::max(1, script.base_length + jitter(rng));
}

std::string clip_id_for(int subject_id, int gesture_id, Place place, int repeat) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "s%02d_g%02d_%s_r%d", subject_id, gesture_id,
                place == Place::indoor ? "indoor" : "outdoor", repeat);
  return buf;
}

corpus::Manifest generate_corpus(const SynthConfig& cfg, const std::filesystem::path& out_dir) {
  validate(cfg);
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "clips", ec);
  if (ec) throw Error(ErrorCode::io, "cannot create output directory " + out_dir.string() + ": " + ec.message());

  corpus::Manifest m;
  m.root = out_dir;
  std::ostringstream prov;
  prov << "synthgen preset=" << (cfg.preset.empty() ? "custom" : cfg.preset) << " seed=" << cfg.seed
       << " subjects=" << cfg.subjects.size() << " gestures=" << cfg.gestures.size()
       << " repeats=" << cfg.repeats_per_cell << '\n';
  m.provenance = prov.str();

  for (std::size_t si = 0; si < cfg.subjects.size(); ++si) {
    const int subject_id = static_cast<int>(si) + 1;
    for (const auto& script : cfg.gestures) {
      for (Place place : cfg.places) {
        for (int rep = 0; rep < cfg.repeats_per_cell; ++rep) {
          const std::uint64_t seed = cell_seed(cfg.seed, script.gesture_id, place, rep);
          const int length = cell_length(cfg, script, seed);
          const PlaceStyle style{place, cfg.background, static_cast<int>(si)};
          RenderedClip rc = render_clip(cfg.subjects[si], script, style, length, seed, cfg);

          corpus::ClipRecord r;
          r.clip_id = clip_id_for(subject_id, script.gesture_id, place, rep);
          r.subject_id = subject_id;
          r.gesture_id = script.gesture_id;
          r.place = place;
          r.num_frames = length;
          r.path = "clips/" + r.clip_id;
          r.has_depth = true;
          const auto dir = out_dir / r.path;
          std::filesystem::remove_all(dir, ec);
          corpus::write_clip(rc.clip, dir);
          m.records.push_back(std::move(r));
        }
      }
    }
  }
  corpus::save_manifest(m, out_dir / "manifest.jsonl");
  std::ofstream(out_dir / "synth_config.ini", std::ios::binary | std::ios::trunc) << kv::dump(config_to_kv(cfg));
  return m;
}

}  // namespace ehi::synth
