#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ehi/dataset.hpp"
#include "ehi/evalkit.hpp"
#include "ehi/experiment.hpp"
#include "ehi/log.hpp"
#include "ehi/synthgen.hpp"

namespace ehi::cli {

namespace {

using json = nlohmann::json;

[[noreturn]] void missing(const std::string& what, const std::string& hint) {
  throw Error(ErrorCode::missing_prerequisite, what + " (" + hint + ")");
}

fs::path manifest_path(const ExperimentConfig& cfg) {
  if (!cfg.data.manifest.empty()) {
    if (!fs::exists(cfg.data.manifest)) {
      missing("manifest not found: " + cfg.data.manifest.string(), "check data.manifest or run `ehi synth`");
    }
    return cfg.data.manifest;
  }
  if (auto dir = latest_dir(cfg.output_dir, "synth")) {
    const fs::path p = *dir / "corpus" / "manifest.jsonl";
    if (fs::exists(p)) return p;
  }
  missing("no manifest configured and no synthetic corpus under " + cfg.output_dir.string(),
          "set data.manifest or run `ehi synth` first");
}

corpus::Manifest load_corpus(const ExperimentConfig& cfg) {
  const fs::path p = manifest_path(cfg);
  log::info("manifest %s", p.c_str());
  return corpus::load_manifest(p);
}

fs::path checkpoint_path(const ExperimentConfig& cfg) {
  if (!cfg.eval.checkpoint.empty()) {
    if (!fs::exists(cfg.eval.checkpoint)) {
      missing("checkpoint not found: " + cfg.eval.checkpoint.string(), "check eval.checkpoint or run `ehi train`");
    }
    return cfg.eval.checkpoint;
  }
  if (auto dir = latest_dir(cfg.output_dir, "train")) {
    const fs::path p = *dir / "best.pt";
    if (fs::exists(p)) return p;
  }
  missing("no checkpoint configured and no training run under " + cfg.output_dir.string(),
          "set eval.checkpoint or run `ehi train` first");
}

data::PrepareOptions prepare_options(const ExperimentConfig& cfg, ablate::InputVariant v) {
  return {v, cfg.variant.options, cfg.data.cache_dir};
}

void require_modalities(const corpus::Manifest& m, ablate::InputVariant v) {
  if (!ablate::needs_depth(v)) return;
  for (const auto& r : m.records) {
    if (!r.has_depth) {
      throw Error(ErrorCode::modality_missing, "variant " + std::string(ablate::to_string(v)) +
                                                   " needs depth but clip " + r.clip_id + " has none");
    }
  }
}

std::vector<data::PreparedClip> prepare(const ExperimentConfig& cfg, const corpus::Manifest& m,
                                        ablate::InputVariant v) {
  require_modalities(m, v);
  return data::prepare_clips(m, prepare_options(cfg, v));
}

/// Checkpoint plus the experiment config it was trained under.
struct TrainedModel {
  net::VideoResNet model{nullptr};
  net::CheckpointMeta meta;
  ablate::InputVariant variant = ablate::InputVariant::rgb;
};

TrainedModel load_trained(ExperimentConfig& cfg) {
  const fs::path path = checkpoint_path(cfg);
  log::info("checkpoint %s", path.c_str());
  auto loaded = net::load_checkpoint(path);
  TrainedModel t{loaded.model, loaded.meta, cfg.variant.variant};
  if (!cfg.variant.name_given) {
    const kv::Document stored = kv::parse(loaded.meta.config_text, path.string());
    const kv::Section* s = stored.first("variant");
    if (s && s->get("name")) t.variant = ablate::parse_variant(*s->get("name"));
    cfg.variant.variant = t.variant;
    cfg.variant.name_given = true;
  }
  cfg.eval.checkpoint = path;
  const int want = t.model->config().in_channels;
  if (ablate::channels(t.variant) != want) {
    throw Error(ErrorCode::config, "variant.name " + std::string(ablate::to_string(t.variant)) + " has " +
                                       std::to_string(ablate::channels(t.variant)) +
                                       " channels but the checkpoint expects " + std::to_string(want));
  }
  t.model->eval();
  return t;
}

std::set<int> seen_gestures(const ExperimentConfig& cfg, const Partitions& p, const corpus::Manifest& test) {
  if (cfg.eval.seen_gestures == "none") return {};
  if (cfg.eval.seen_gestures == "even") {
    std::set<int> ids;
    for (const auto& r : test.records) {
      if (r.gesture_id % 2 == 0) ids.insert(r.gesture_id);
    }
    return ids;
  }
  return p.seen_gestures;
}

/// Test partition, or the whole manifest when the split has none.
corpus::Manifest evaluation_set(const Partitions& p, const corpus::Manifest& all) {
  if (!p.test.empty()) return p.test;
  log::warn("split has no test partition; evaluating on every clip");
  return all;
}

eval::Head pick_head(HeadChoice c, const net::ModelConfig& mc, bool prefer_subject) {
  eval::Head h = prefer_subject ? (mc.subject_head ? eval::Head::subject : eval::Head::gesture)
                                : (mc.gesture_head ? eval::Head::gesture : eval::Head::subject);
  if (c == HeadChoice::subject) h = eval::Head::subject;
  if (c == HeadChoice::gesture) h = eval::Head::gesture;
  if ((h == eval::Head::subject && !mc.subject_head) || (h == eval::Head::gesture && !mc.gesture_head)) {
    throw Error(ErrorCode::config, "eval.head: the checkpoint has no " + std::string(eval::to_string(h)) + " head");
  }
  return h;
}

data::LabelMap labels_for(const net::CheckpointMeta& meta, eval::Head h) {
  return data::LabelMap(h == eval::Head::subject ? meta.subject_labels : meta.gesture_labels);
}

void write_json(const fs::path& p, const json& j) { eval::write_text(p, j.dump(2) + "\n"); }

void write_loss_plots(const fs::path& dir, const train::LossReport& r) {
  eval::Series lg{"L_g", {}, {}}, lp{"L_p", {}, {}}, total{"total", {}, {}};
  eval::Series train_acc{"train", {}, {}}, val_acc{"val", {}, {}};
  for (const auto& e : r.epochs) {
    const double x = e.epoch + 1;
    lg.x.push_back(x), lg.y.push_back(e.loss_g);
    lp.x.push_back(x), lp.y.push_back(e.loss_p);
    total.x.push_back(x), total.y.push_back(e.total);
    train_acc.x.push_back(x), train_acc.y.push_back(e.train_accuracy);
    if (e.val_accuracy) val_acc.x.push_back(x), val_acc.y.push_back(*e.val_accuracy);
  }
  std::vector<eval::Series> losses;
  for (auto* s : {&lg, &lp}) {
    if (std::any_of(s->y.begin(), s->y.end(), [](double v) { return v != 0.0; })) losses.push_back(*s);
  }
  losses.push_back(total);
  eval::write_text(dir / "loss.svg", eval::svg_line_plot("training loss", "epoch", "loss", losses));
  std::vector<eval::Series> acc{train_acc};
  if (!val_acc.x.empty()) acc.push_back(val_acc);
  eval::write_text(dir / "accuracy.svg", eval::svg_line_plot("accuracy", "epoch", "accuracy", acc));
}

train::TrainResult fit(const ExperimentConfig& cfg, const train::TrainConfig& tc,
                       const std::vector<data::PreparedClip>& train_clips,
                       const std::vector<data::PreparedClip>& val_clips) {
  net::ModelConfig mc = cfg.model;
  mc.in_channels = ablate::channels(tc.variant);
  train::TrainHooks hooks;
  hooks.on_epoch = [&](const train::EpochRecord& e) {
    if (e.val_accuracy) {
      log::info("epoch %d/%d  loss %.4f  train acc %.3f  val acc %.3f", e.epoch + 1, tc.epochs, e.total,
                e.train_accuracy, *e.val_accuracy);
    } else {
      log::info("epoch %d/%d  loss %.4f  train acc %.3f", e.epoch + 1, tc.epochs, e.total, e.train_accuracy);
    }
  };
  return train::train(mc, tc, train_clips, val_clips, hooks, cfg.pretrained);
}

// --- commands --------------------------------------------------------------

void cmd_synth(const ExperimentConfig& cfg, const fs::path& dir) {
  synth::SynthConfig sc;
  if (!cfg.data.synth_config.empty()) {
    if (!fs::exists(cfg.data.synth_config)) {
      missing("generator config not found: " + cfg.data.synth_config.string(), "check data.synth_config");
    }
    sc = synth::load_config(cfg.data.synth_config);
  } else {
    sc = synth::make_preset(cfg.data.synth_preset, {cfg.data.synth_subjects, cfg.data.synth_gestures,
                                                    cfg.data.synth_repeats, cfg.seed});
  }
  auto m = synth::generate_corpus(sc, dir / "corpus");
  eval::write_text(dir / "corpus" / "generator.ini", kv::dump(synth::config_to_kv(sc)));
  log::info("wrote %zu clips to %s", m.size(), (dir / "corpus").c_str());
}

void cmd_preprocess(const ExperimentConfig& cfg, const fs::path& dir, const RunOptions& run_opts) {
  const auto m = load_corpus(cfg);
  require_modalities(m, cfg.variant.variant);
  auto opts = prepare_options(cfg, cfg.variant.variant);
  opts.cache_dir = run_opts.out.empty() ? dir / "cache" : fs::absolute(run_opts.out);
  const auto clips = data::prepare_clips(m, opts);
  std::ostringstream csv;
  csv << "clip_id,frames,padded_frames,height,width,channels,file\n";
  for (const auto& c : clips) {
    const fs::path file = data::cache_file(opts.cache_dir, c.clip_id, opts.variant);
    csv << c.clip_id << ',' << c.num_frames << ',' << c.clip.frames << ',' << c.clip.height << ','
        << c.clip.width << ',' << c.clip.channels << ','
        << (run_opts.out.empty() ? file.lexically_relative(dir) : file).generic_string() << "\n";
  }
  eval::write_text(dir / "prepared.csv", csv.str());
  log::info("prepared %zu clips (%s)", clips.size(), std::string(ablate::to_string(opts.variant)).c_str());
}

void cmd_train(const ExperimentConfig& cfg, const fs::path& dir, const RunOptions& opts) {
  const auto m = load_corpus(cfg);
  const auto parts = make_partitions(cfg.data, m);
  if (parts.train.empty()) throw Error(ErrorCode::config, "data.split leaves no training clips");
  const auto train_clips = prepare(cfg, parts.train, cfg.train.variant);
  const auto val_clips = prepare(cfg, parts.val, cfg.train.variant);
  log::info("training %s on %zu clips (%zu validation)", std::string(train::to_string(cfg.train.objective)).c_str(),
            train_clips.size(), val_clips.size());

  auto res = fit(cfg, cfg.train, train_clips, val_clips);
  const std::string config_text = kv::dump(to_document(cfg));
  net::save_checkpoint(dir / "final.pt", *res.final_model, nullptr,
                       train::checkpoint_meta(res, config_text, cfg.train.epochs));
  const int best_epoch = res.report.best_epoch >= 0 ? res.report.best_epoch + 1 : cfg.train.epochs;
  net::save_checkpoint(dir / "best.pt", *res.best_model, nullptr, train::checkpoint_meta(res, config_text, best_epoch));
  res.report.write_csv(dir / "loss.csv");
  res.report.write_json(dir / "loss.json");
  write_loss_plots(dir, res.report);
  if (!opts.out.empty()) {
    if (opts.out.has_parent_path()) fs::create_directories(opts.out.parent_path());
    fs::copy_file(dir / "best.pt", opts.out, fs::copy_options::overwrite_existing);
    log::info("best checkpoint copied to %s", opts.out.c_str());
  }
}

void cmd_eval(ExperimentConfig& cfg, const fs::path& dir) {
  auto t = load_trained(cfg);
  const auto m = load_corpus(cfg);
  const auto parts = make_partitions(cfg.data, m);
  const auto test = evaluation_set(parts, m);
  const auto clips = prepare(cfg, test, t.variant);
  const auto& mc = t.model->config();

  std::vector<eval::Head> heads;
  if (cfg.eval.head == HeadChoice::automatic) {
    if (mc.subject_head) heads.push_back(eval::Head::subject);
    if (mc.gesture_head) heads.push_back(eval::Head::gesture);
  } else {
    heads.push_back(pick_head(cfg.eval.head, mc, true));
  }
  eval::Groupings g;
  g.seen_gestures = seen_gestures(cfg, parts, test);
  json summary;
  for (auto h : heads) {
    const std::string name(eval::to_string(h));
    auto r = eval::evaluate(*t.model, clips, h, labels_for(t.meta, h), g, {cfg.eval.drop_tail});
    eval::write_eval_report(dir / name, r);
    summary[name] = {{"accuracy", r.overall.accuracy()}, {"correct", r.overall.correct}, {"total", r.overall.total}};
    log::info("%s accuracy %.4f (%d/%d)", name.c_str(), r.overall.accuracy(), r.overall.correct, r.overall.total);
  }
  write_json(dir / "summary.json", summary);
}

void cmd_verify(ExperimentConfig& cfg, const fs::path& dir) {
  auto t = load_trained(cfg);
  const auto m = load_corpus(cfg);
  const auto test = evaluation_set(make_partitions(cfg.data, m), m);
  // Indoor references come from the whole corpus so place splits, whose
  // test side is outdoor only, still yield pairs for the test subjects.
  std::set<int> subjects;
  for (const auto& r : test.records) subjects.insert(r.subject_id);
  std::vector<corpus::ClipRecord> indoor, outdoor;
  for (const auto& r : m.records) {
    if (r.place == corpus::Place::indoor && subjects.count(r.subject_id)) indoor.push_back(r);
  }
  for (const auto& r : test.records) {
    if (r.place == corpus::Place::outdoor) outdoor.push_back(r);
  }
  const auto pairs = corpus::enumerate_verification_pairs(m.with_records(indoor), m.with_records(outdoor));
  indoor.insert(indoor.end(), outdoor.begin(), outdoor.end());
  const auto clips = prepare(cfg, m.with_records(std::move(indoor)), t.variant);
  const auto r = eval::verify(*t.model, pairs, clips, {cfg.eval.drop_tail});
  eval::write_verification_report(dir, r);
  log::info("EER %.4f over %zu pairs (%zu same)", r.eer.eer, pairs.pairs.size(), pairs.positives());
}

void cmd_cam(ExperimentConfig& cfg, const fs::path& dir) {
  auto t = load_trained(cfg);
  const auto m = load_corpus(cfg);
  auto test = evaluation_set(make_partitions(cfg.data, m), m);
  if (cfg.eval.cam_clips > 0 && test.size() > static_cast<std::size_t>(cfg.eval.cam_clips)) {
    auto recs = test.records;
    std::mt19937_64 rng(data::mix_seed(cfg.seed, 0xca3));
    std::shuffle(recs.begin(), recs.end(), rng);
    recs.resize(static_cast<std::size_t>(cfg.eval.cam_clips));
    std::sort(recs.begin(), recs.end(), [](const auto& a, const auto& b) { return a.clip_id < b.clip_id; });
    test = test.with_records(std::move(recs));
  }
  const auto clips = prepare(cfg, test, t.variant);
  const auto head = pick_head(cfg.eval.head, t.model->config(), true);
  const auto cam = eval::average_cam(*t.model, clips, head, labels_for(t.meta, head),
                                     cfg.eval.cam_true_class ? eval::CamClass::true_class : eval::CamClass::predicted,
                                     {cfg.eval.drop_tail});
  const bool depth = std::all_of(test.records.begin(), test.records.end(), [](const auto& r) { return r.has_depth; });
  torch::Tensor mask;
  if (depth) {
    mask = eval::mean_hand_mask(test, cfg.variant.options.otsu_scope);
  } else {
    log::warn("clips without depth; no mean hand mask");
  }
  eval::write_cam_report(dir, cam, mask);
  log::info("CAM peak (%d, %d) over %d clips", cam.peak_row, cam.peak_col, cam.clips);
}

void cmd_ablation(const ExperimentConfig& cfg, const fs::path& dir) {
  const auto m = load_corpus(cfg);
  const auto parts = make_partitions(cfg.data, m);
  if (parts.train.empty()) throw Error(ErrorCode::config, "data.split leaves no training clips");
  const auto test = evaluation_set(parts, m);
  const bool depth = std::all_of(m.records.begin(), m.records.end(), [](const auto& r) { return r.has_depth; });

  std::ostringstream csv;
  csv << "variant,channels,accuracy,correct,total";
  for (auto s : {eval::Stratum::short_clips, eval::Stratum::medium_clips, eval::Stratum::long_clips}) {
    csv << ',' << eval::to_string(s);
  }
  csv << "\n";
  json rows = json::array();
  std::vector<std::string> names;
  std::vector<double> accs;
  for (auto v : ablate::kAllVariants) {
    const std::string name(ablate::to_string(v));
    if (ablate::needs_depth(v) && !depth) {
      log::warn("skipping %s: corpus has no depth", name.c_str());
      csv << name << ',' << ablate::channels(v) << ",,,,,,\n";
      continue;
    }
    // A fresh model per variant keeps channel counts from ever mixing.
    train::TrainConfig tc = cfg.train;
    tc.objective = train::Objective::single_subject;
    tc.variant = v;
    log::info("ablation: %s", name.c_str());
    const auto train_clips = prepare(cfg, parts.train, v);
    const auto val_clips = prepare(cfg, parts.val, v);
    auto res = fit(cfg, tc, train_clips, val_clips);
    const auto test_clips = prepare(cfg, test, v);
    eval::Groupings g;
    g.seen_gestures = parts.seen_gestures;
    auto r = eval::evaluate(*res.best_model, test_clips, eval::Head::subject, res.subjects, g, {cfg.eval.drop_tail});
    const fs::path sub = dir / name;
    eval::write_eval_report(sub, r);
    res.report.write_csv(sub / "loss.csv");
    csv << name << ',' << ablate::channels(v) << ',' << r.overall.accuracy() << ',' << r.overall.correct << ','
        << r.overall.total;
    for (const auto& s : r.per_stratum) csv << ',' << s.accuracy();
    for (std::size_t i = r.per_stratum.size(); i < 3; ++i) csv << ',';
    csv << "\n";
    rows.push_back({{"variant", name}, {"channels", ablate::channels(v)}, {"accuracy", r.overall.accuracy()},
                    {"correct", r.overall.correct}, {"total", r.overall.total}});
    names.push_back(name);
    accs.push_back(r.overall.accuracy());
    log::info("ablation: %s accuracy %.4f", name.c_str(), r.overall.accuracy());
  }
  eval::write_text(dir / "ablation.csv", csv.str());
  write_json(dir / "ablation.json", rows);
  eval::write_text(dir / "ablation.svg", eval::svg_bar_chart("subject accuracy by input", names, accs, "accuracy"));
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in, nullptr, false);
}

void cmd_report(const ExperimentConfig& cfg, const fs::path& dir, const RunOptions& opts) {
  std::vector<fs::path> inputs = opts.report_inputs;
  if (inputs.empty()) {
    for (auto c : {"train", "eval", "verify", "cam", "ablation-suite"}) {
      if (auto d = latest_dir(cfg.output_dir, c)) inputs.push_back(*d);
    }
  }
  if (inputs.empty()) {
    missing("nothing to report under " + cfg.output_dir.string(), "run train, eval, verify, cam or ablation-suite first");
  }
  json runs = json::array();
  std::ostringstream md;
  md << "| run | metric | value |\n|---|---|---|\n";
  auto row = [&](const fs::path& d, const std::string& metric, double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    md << "| " << d.parent_path().filename().string() << '/' << d.filename().string() << " | " << metric << " | "
       << buf << " |\n";
  };
  for (const auto& d : inputs) {
    if (!fs::is_directory(d)) missing("artifact directory not found: " + d.string(), "pass an existing run directory");
    json entry = {{"dir", d.string()}};
    for (auto head : {"subject", "gesture"}) {
      if (fs::exists(d / head / "report.json")) {
        const json r = read_json(d / head / "report.json");
        entry[std::string(head) + "_accuracy"] = r.value("accuracy", 0.0);
        row(d, std::string(head) + " accuracy", r.value("accuracy", 0.0));
      }
    }
    if (fs::exists(d / "verification.json")) {
      const json r = read_json(d / "verification.json");
      entry["eer"] = r.value("eer", 0.0);
      row(d, "EER", r.value("eer", 0.0));
    }
    if (fs::exists(d / "cam.json")) {
      const json r = read_json(d / "cam.json");
      if (r.contains("peak_distance")) {
        entry["cam_peak_distance"] = r["peak_distance"];
        row(d, "CAM peak distance (px)", r["peak_distance"].get<double>());
      }
    }
    if (fs::exists(d / "ablation.json")) {
      const json r = read_json(d / "ablation.json");
      entry["ablation"] = r;
      for (const auto& v : r) row(d, v["variant"].get<std::string>() + " accuracy", v["accuracy"].get<double>());
    }
    if (fs::exists(d / "loss.json")) {
      const json r = read_json(d / "loss.json");
      if (r.contains("best_val_accuracy")) entry["best_val_accuracy"] = r["best_val_accuracy"];
      if (r.contains("epochs") && !r["epochs"].empty()) {
        const auto& last = r["epochs"].back();
        if (last.contains("total")) row(d, "final training loss", last["total"].get<double>());
      }
    }
    runs.push_back(entry);
  }
  write_json(dir / "summary.json", {{"runs", runs}});
  eval::write_text(dir / "summary.md", md.str());
  log::info("summarized %zu runs into %s", inputs.size(), (dir / "summary.md").c_str());
}

}  // namespace

fs::path run(Command cmd, const ExperimentConfig& config, const RunOptions& opts) {
  ExperimentConfig cfg = config;
  if (cfg.deterministic || train::deterministic_from_env()) {
    cfg.deterministic = true;
    train::set_deterministic(true);
  }
  ArtifactDir out(cfg.output_dir, to_string(cmd));
  log::info("%s -> %s", std::string(to_string(cmd)).c_str(), out.path().c_str());
  try {
    switch (cmd) {
      case Command::synth: cmd_synth(cfg, out.path()); break;
      case Command::preprocess: cmd_preprocess(cfg, out.path(), opts); break;
      case Command::train: cmd_train(cfg, out.path(), opts); break;
      case Command::eval: cmd_eval(cfg, out.path()); break;
      case Command::verify: cmd_verify(cfg, out.path()); break;
      case Command::cam: cmd_cam(cfg, out.path()); break;
      case Command::report: cmd_report(cfg, out.path(), opts); break;
      case Command::ablation_suite: cmd_ablation(cfg, out.path()); break;
    }
    out.commit(to_document(cfg));
  } catch (...) {
    // Only committed runs leave a directory behind.
    std::error_code ec;
    fs::remove_all(out.path(), ec);
    throw;
  }
  return out.path();
}

}  // namespace ehi::cli
