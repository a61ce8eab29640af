#include <algorithm>
#include <cstdio>

#include "ehi/experiment.hpp"
#include "ehi/synthgen.hpp"

namespace ehi::cli {

namespace {

const std::vector<std::string_view> kSplits = {"none",
                                               "place",
                                               "subjects",
                                               corpus::presets::place,
                                               corpus::presets::verification_subjects,
                                               corpus::presets::even_gestures};

const std::vector<std::string_view> kSections = {"experiment", "data", "variant", "model", "train", "eval"};

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorCode::config, msg); }

std::string choice(kv::SectionReader& r, std::string_view key, std::string fallback,
                   const std::vector<std::string_view>& allowed, const std::string& path) {
  std::string v = r.str(key, std::move(fallback));
  if (std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
    std::string list;
    for (auto a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
    config_error(path + ": '" + v + "' is not one of " + list);
  }
  return v;
}

std::string real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string id_list(const std::set<int>& ids) {
  std::string s;
  for (int id : ids) s += (s.empty() ? "" : ",") + std::to_string(id);
  return s;
}

DataConfig read_data(const kv::Section* s) {
  kv::SectionReader r(s, "data");
  DataConfig d;
  d.manifest = r.str("manifest", "");
  d.split = choice(r, "split", d.split, kSplits, "data.split");
  d.train_subjects = parse_id_list(r.str("train_subjects", ""), "data.train_subjects");
  d.val_subjects = parse_id_list(r.str("val_subjects", ""), "data.val_subjects");
  d.test_subjects = parse_id_list(r.str("test_subjects", ""), "data.test_subjects");
  d.train_gestures = choice(r, "train_gestures", d.train_gestures, {"all", "even"}, "data.train_gestures");
  d.cache_dir = r.str("cache_dir", "");
  auto presets = synth::preset_names();
  d.synth_preset = choice(r, "synth_preset", d.synth_preset, presets, "data.synth_preset");
  d.synth_config = r.str("synth_config", "");
  d.synth_subjects = static_cast<int>(r.integer("synth_subjects", d.synth_subjects));
  d.synth_gestures = static_cast<int>(r.integer("synth_gestures", d.synth_gestures));
  d.synth_repeats = static_cast<int>(r.integer("synth_repeats", d.synth_repeats));
  r.finish();
  if (d.synth_subjects < 1 || d.synth_gestures < 1 || d.synth_repeats < 1) {
    config_error("data.synth_subjects, data.synth_gestures and data.synth_repeats must be >= 1");
  }
  if (d.split == "subjects" && (d.train_subjects.empty() || d.test_subjects.empty())) {
    config_error("data.split = subjects needs data.train_subjects and data.test_subjects");
  }
  return d;
}

VariantConfig read_variant(const kv::Section* s) {
  kv::SectionReader r(s, "variant");
  VariantConfig v;
  v.name_given = r.has("name");
  try {
    v.variant = ablate::parse_variant(r.str("name", "rgb"));
  } catch (const Error& e) {
    config_error(std::string("variant.name: ") + e.what());
  }
  const std::string scope = choice(r, "otsu_scope", "per_frame", {"per_frame", "per_clip"}, "variant.otsu_scope");
  v.options.otsu_scope = scope == "per_clip" ? ablate::OtsuScope::per_clip : ablate::OtsuScope::per_frame;
  v.options.depth.near_mm = r.real("depth_near_mm", v.options.depth.near_mm);
  v.options.depth.far_mm = r.real("depth_far_mm", v.options.depth.far_mm);
  r.finish();
  if (!(v.options.depth.near_mm >= 0.0 && v.options.depth.far_mm > v.options.depth.near_mm + 1.0)) {
    config_error("variant.depth_near_mm must be >= 0 and below variant.depth_far_mm - 1");
  }
  return v;
}

EvalConfig read_eval(const kv::Section* s) {
  kv::SectionReader r(s, "eval");
  EvalConfig e;
  e.checkpoint = r.str("checkpoint", "");
  const std::string head = choice(r, "head", "auto", {"auto", "subject", "gesture"}, "eval.head");
  e.head = head == "subject" ? HeadChoice::subject : head == "gesture" ? HeadChoice::gesture : HeadChoice::automatic;
  e.drop_tail = r.boolean("drop_tail", e.drop_tail);
  e.cam_true_class = choice(r, "cam_class", "predicted", {"predicted", "true"}, "eval.cam_class") == "true";
  e.cam_clips = static_cast<int>(r.integer("cam_clips", e.cam_clips));
  e.seen_gestures = choice(r, "seen_gestures", e.seen_gestures, {"auto", "even", "none"}, "eval.seen_gestures");
  r.finish();
  if (e.cam_clips < 0) config_error("eval.cam_clips must be >= 0");
  return e;
}

}  // namespace

std::string_view to_string(Command c) noexcept {
  switch (c) {
    case Command::synth: return "synth";
    case Command::preprocess: return "preprocess";
    case Command::train: return "train";
    case Command::eval: return "eval";
    case Command::verify: return "verify";
    case Command::cam: return "cam";
    case Command::report: return "report";
    case Command::ablation_suite: return "ablation-suite";
  }
  return "?";
}

Command parse_command(std::string_view s) {
  for (Command c : {Command::synth, Command::preprocess, Command::train, Command::eval, Command::verify,
                    Command::cam, Command::report, Command::ablation_suite}) {
    if (to_string(c) == s) return c;
  }
  config_error("unknown command '" + std::string(s) + "'");
}

std::set<int> parse_id_list(std::string_view text, std::string_view what) {
  std::set<int> ids;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    std::string_view item = text.substr(pos, comma - pos);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (item.empty()) {
      pos = comma + 1;
      continue;
    }
    // "a-b" is an inclusive range.
    const std::size_t dash = item.find('-', 1);
    if (dash == std::string_view::npos) {
      ids.insert(static_cast<int>(kv::parse_integer(item, what)));
    } else {
      const auto lo = kv::parse_integer(item.substr(0, dash), what);
      const auto hi = kv::parse_integer(item.substr(dash + 1), what);
      if (hi < lo) config_error(std::string(what) + ": empty range '" + std::string(item) + "'");
      for (auto i = lo; i <= hi; ++i) ids.insert(static_cast<int>(i));
    }
    pos = comma + 1;
  }
  return ids;
}

ExperimentConfig resolve(const kv::Document& doc) {
  for (const auto& s : doc.sections) {
    if (std::find(kSections.begin(), kSections.end(), s.name) == kSections.end()) {
      config_error("unknown config section '" + s.name + "'");
    }
    if (doc.all(s.name).size() > 1) config_error("config section '" + s.name + "' appears more than once");
  }

  ExperimentConfig c;
  {
    kv::SectionReader r(doc.first("experiment"), "experiment");
    const long long seed = r.integer("seed", 1);
    if (seed < 0) config_error("experiment.seed must be >= 0");
    c.seed = static_cast<std::uint64_t>(seed);
    c.output_dir = r.str("output_dir", "runs");
    c.deterministic = r.boolean("deterministic", false);
    r.finish();
  }
  c.data = read_data(doc.first("data"));
  c.variant = read_variant(doc.first("variant"));
  {
    kv::SectionReader r(doc.first("model"), "model");
    try {
      c.model.arch = net::parse_arch(r.str("arch", "tiny3d"));
    } catch (const Error& e) {
      config_error(std::string("model.arch: ") + e.what());
    }
    c.model.width_multiplier = r.real("width_multiplier", 1.0);
    c.pretrained = r.str("pretrained", "");
    r.finish();
    c.model.in_channels = ablate::channels(c.variant.variant);
    if (!(c.model.width_multiplier > 0.0 && c.model.width_multiplier <= 1.0)) {
      config_error("model.width_multiplier must be in (0, 1]");
    }
  }
  train::TrainConfig base;
  base.seed = c.seed;
  base.variant = c.variant.variant;
  c.train = train::train_config_from_kv(doc.first("train"), base);
  c.eval = read_eval(doc.first("eval"));
  return c;
}

kv::Document to_document(const ExperimentConfig& c) {
  kv::Document doc;
  auto& e = doc.ensure("experiment");
  e.set("seed", std::to_string(c.seed));
  e.set("output_dir", c.output_dir.string());
  e.set("deterministic", c.deterministic ? "true" : "false");

  auto& d = doc.ensure("data");
  d.set("manifest", c.data.manifest.string());
  d.set("split", c.data.split);
  d.set("train_subjects", id_list(c.data.train_subjects));
  d.set("val_subjects", id_list(c.data.val_subjects));
  d.set("test_subjects", id_list(c.data.test_subjects));
  d.set("train_gestures", c.data.train_gestures);
  d.set("cache_dir", c.data.cache_dir.string());
  d.set("synth_preset", c.data.synth_preset);
  d.set("synth_config", c.data.synth_config.string());
  d.set("synth_subjects", std::to_string(c.data.synth_subjects));
  d.set("synth_gestures", std::to_string(c.data.synth_gestures));
  d.set("synth_repeats", std::to_string(c.data.synth_repeats));

  auto& v = doc.ensure("variant");
  v.set("name", std::string(ablate::to_string(c.variant.variant)));
  v.set("otsu_scope", c.variant.options.otsu_scope == ablate::OtsuScope::per_clip ? "per_clip" : "per_frame");
  v.set("depth_near_mm", real(c.variant.options.depth.near_mm));
  v.set("depth_far_mm", real(c.variant.options.depth.far_mm));

  auto& m = doc.ensure("model");
  m.set("arch", std::string(net::to_string(c.model.arch)));
  m.set("width_multiplier", real(c.model.width_multiplier));
  m.set("pretrained", c.pretrained.string());

  train::train_config_to_kv(c.train, doc.ensure("train"));

  auto& ev = doc.ensure("eval");
  ev.set("checkpoint", c.eval.checkpoint.string());
  ev.set("head", c.eval.head == HeadChoice::subject   ? "subject"
                 : c.eval.head == HeadChoice::gesture ? "gesture"
                                                      : "auto");
  ev.set("drop_tail", c.eval.drop_tail ? "true" : "false");
  ev.set("cam_class", c.eval.cam_true_class ? "true" : "predicted");
  ev.set("cam_clips", std::to_string(c.eval.cam_clips));
  ev.set("seen_gestures", c.eval.seen_gestures);
  return doc;
}

kv::Document load_document(const std::optional<fs::path>& file, const std::vector<std::string>& overrides) {
  kv::Document doc;
  if (file) {
    if (!fs::exists(*file)) config_error("config file not found: " + file->string());
    try {
      doc = kv::load(*file);
    } catch (const Error& e) {
      config_error(e.what());
    }
  }
  for (const auto& o : overrides) kv::apply_override(doc, o);
  return doc;
}

Partitions make_partitions(const DataConfig& cfg, const corpus::Manifest& m) {
  Partitions p{m.with_records({}), m.with_records({}), m.with_records({}), {}};
  if (cfg.split == "none") {
    p.train = m;
  } else if (cfg.split == "place") {
    auto s = corpus::split_by_place(m);
    p.train = std::move(s.train);
    p.test = std::move(s.eval);
  } else if (cfg.split == "subjects") {
    auto s = corpus::split_subjects(m, cfg.train_subjects, cfg.val_subjects, cfg.test_subjects);
    p.train = std::move(s.train);
    p.val = std::move(s.val);
    p.test = std::move(s.test);
  } else {
    const bool even = cfg.split == corpus::presets::even_gestures;
    auto parts = corpus::presets::apply(even ? corpus::presets::place : std::string_view(cfg.split), m);
    p.train = parts.at("train");
    p.val = parts.at("val");
    p.test = parts.at("test");
  }
  if (cfg.train_gestures == "even" || cfg.split == corpus::presets::even_gestures) {
    auto seen = corpus::split_gestures_even(p.train).seen;
    for (const auto& r : seen.records) p.seen_gestures.insert(r.gesture_id);
    p.train = std::move(seen);
  }
  return p;
}

int exit_code(const Error& e) noexcept {
  switch (e.code()) {
    case ErrorCode::config: return 2;
    case ErrorCode::missing_prerequisite:
    case ErrorCode::missing_files:
    case ErrorCode::modality_missing: return 3;
    default: return 4;
  }
}

}  // namespace ehi::cli
