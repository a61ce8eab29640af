// ehi: command-line front end for the hand identification experiments.

#include <cstdio>
#include <exception>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ehi/experiment.hpp"
#include "ehi/log.hpp"

namespace {

struct Flags {
  std::optional<std::string> config;
  std::vector<std::string> sets;
  std::optional<std::string> output_dir;
  std::optional<long long> seed;
  bool deterministic = false;
  bool verbose = false;
  bool quiet = false;

  std::optional<std::string> manifest, variant, preset, objective, arch, checkpoint, head, cache_dir, pretrained;
  std::optional<int> subjects, gestures, repeats, epochs;
  std::string out;
  bool true_class = false;
  std::vector<std::string> inputs;
};

void add(std::vector<std::string>& o, const char* key, const std::optional<std::string>& v) {
  if (v) o.push_back(std::string(key) + "=" + *v);
}

template <class T>
void add(std::vector<std::string>& o, const char* key, const std::optional<T>& v) {
  if (v) o.push_back(std::string(key) + "=" + std::to_string(*v));
}

/// Dedicated flags are sugar for `--set`; explicit `--set` values win.
std::vector<std::string> overrides_from(const Flags& f) {
  std::vector<std::string> o;
  add(o, "experiment.output_dir", f.output_dir);
  add(o, "experiment.seed", f.seed);
  if (f.deterministic) o.push_back("experiment.deterministic=true");
  add(o, "data.manifest", f.manifest);
  add(o, "data.cache_dir", f.cache_dir);
  add(o, "data.synth_preset", f.preset);
  add(o, "data.synth_subjects", f.subjects);
  add(o, "data.synth_gestures", f.gestures);
  add(o, "data.synth_repeats", f.repeats);
  add(o, "variant.name", f.variant);
  add(o, "model.arch", f.arch);
  add(o, "model.pretrained", f.pretrained);
  add(o, "train.objective", f.objective);
  add(o, "train.epochs", f.epochs);
  add(o, "eval.checkpoint", f.checkpoint);
  add(o, "eval.head", f.head);
  if (f.true_class) o.push_back("eval.cam_class=true");
  o.insert(o.end(), f.sets.begin(), f.sets.end());
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Egocentric hand identification experiments"};
  app.require_subcommand(1);
  Flags f;
  app.add_option("-c,--config", f.config, "Experiment config file");
  app.add_option("--set", f.sets, "Override as section.key=value (repeatable)");
  app.add_option("--output-dir", f.output_dir, "Root of the artifact directories");
  app.add_option("--seed", f.seed, "Experiment seed");
  app.add_flag("--deterministic", f.deterministic, "Deterministic kernels (also EHI_DETERMINISTIC=1)");
  app.add_flag("-v,--verbose", f.verbose, "Debug logging");
  app.add_flag("-q,--quiet", f.quiet, "Warnings and errors only");

  auto sub = [&](const char* name, const char* help) {
    auto* s = app.add_subcommand(name, help);
    s->fallthrough();
    return s;
  };
  auto* synth = sub("synth", "Generate a synthetic RGB-D corpus");
  synth->add_option("--preset", f.preset, "Generator preset");
  synth->add_option("--subjects", f.subjects, "Subjects");
  synth->add_option("--gestures", f.gestures, "Gestures");
  synth->add_option("--repeats", f.repeats, "Repeats per (subject, gesture, place)");

  auto* pre = sub("preprocess", "Materialize an input variant as packed tensors");
  auto* train = sub("train", "Train a model");
  auto* eval = sub("eval", "Accuracy reports on the test partition");
  auto* verify = sub("verify", "Indoor/outdoor pair verification (EER, ROC)");
  auto* cam = sub("cam", "Average class activation map vs mean hand mask");
  auto* report = sub("report", "Summarize earlier runs");
  auto* ablation = sub("ablation-suite", "Train and evaluate every input variant");

  for (auto* s : {pre, train, eval, verify, cam, ablation}) {
    s->add_option("--manifest", f.manifest, "Manifest (JSON Lines)");
    s->add_option("--variant", f.variant, "Input variant");
    s->add_option("--cache-dir", f.cache_dir, "Packed tensor cache");
  }
  for (auto* s : {train, ablation}) {
    s->add_option("--arch", f.arch, "resnet18_3d, resnet18_2d_avg or tiny3d");
    s->add_option("--epochs", f.epochs, "Training epochs");
    s->add_option("--pretrained", f.pretrained, "Pretrained 3D ResNet weights (pickled state dict)");
  }
  train->add_option("--objective", f.objective, "subject, gesture, joint or adversarial");
  train->add_option("--out", f.out, "Extra copy of the best checkpoint");
  pre->add_option("--out", f.out, "Directory for the packed tensors (default: inside the run)");
  for (auto* s : {eval, verify, cam}) s->add_option("--checkpoint", f.checkpoint, "Checkpoint to evaluate");
  for (auto* s : {eval, cam}) s->add_option("--head", f.head, "subject or gesture");
  cam->add_flag("--true-class", f.true_class, "Use the ground-truth class instead of the prediction");
  report->add_option("inputs", f.inputs, "Artifact directories (default: latest of each command)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  ehi::log::set_level(f.verbose ? ehi::log::Level::debug : f.quiet ? ehi::log::Level::warn : ehi::log::Level::info);

  try {
    const auto cmd = ehi::cli::parse_command(app.get_subcommands().front()->get_name());
    const std::optional<std::filesystem::path> file =
        f.config ? std::optional<std::filesystem::path>(*f.config) : std::nullopt;
    const auto cfg = ehi::cli::resolve(ehi::cli::load_document(file, overrides_from(f)));
    ehi::cli::RunOptions opts;
    opts.out = f.out;
    for (const auto& i : f.inputs) opts.report_inputs.emplace_back(i);
    const auto dir = ehi::cli::run(cmd, cfg, opts);
    std::printf("%s\n", dir.c_str());
    return 0;
  } catch (const ehi::Error& e) {
    ehi::log::error("%s", e.what());
    return ehi::cli::exit_code(e);
  } catch (const std::exception& e) {
    ehi::log::error("%s", e.what());
    return 4;
  }
}
