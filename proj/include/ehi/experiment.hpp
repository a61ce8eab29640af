#pragma once

// Experiment configs, artifact directories and the `ehi` commands.
//
// A config is a kv document with the sections
//
//   [experiment]  seed, output_dir, deterministic
//   [data]        manifest, split, *_subjects, train_gestures, cache_dir, synth_*
//   [variant]     name, otsu_scope, depth_near_mm, depth_far_mm
//   [model]       arch, width_multiplier, pretrained
//   [train]       see train::train_config_from_kv
//   [eval]        checkpoint, head, drop_tail, cam_class, cam_clips, seen_gestures
//
// Every section is optional; unknown sections and keys are config errors
// naming the `section.key` path.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ehi/ablate.hpp"
#include "ehi/corpus.hpp"
#include "ehi/error.hpp"
#include "ehi/kvconfig.hpp"
#include "ehi/net.hpp"
#include "ehi/train.hpp"

namespace ehi::cli {

namespace fs = std::filesystem;

enum class Command { synth, preprocess, train, eval, verify, cam, report, ablation_suite };
std::string_view to_string(Command c) noexcept;
Command parse_command(std::string_view s);

struct DataConfig {
  fs::path manifest;  // empty: the latest `synth` corpus under output_dir
  /// none | place | subjects | egogesture-place | egogesture-verification-subjects
  /// | egogesture-even-gestures
  std::string split = "place";
  std::set<int> train_subjects, val_subjects, test_subjects;  // split = subjects
  std::string train_gestures = "all";                          // all | even
  fs::path cache_dir;
  std::string synth_preset = "clean";
  fs::path synth_config;  // overrides synth_preset when set
  int synth_subjects = 4;
  int synth_gestures = 4;
  int synth_repeats = 2;
};

struct VariantConfig {
  ablate::InputVariant variant = ablate::InputVariant::rgb;
  ablate::VariantOptions options;
  bool name_given = false;  // false: checkpoint-reading commands use the stored variant
};

enum class HeadChoice { automatic, subject, gesture };

struct EvalConfig {
  fs::path checkpoint;  // empty: best.pt of the latest `train` run
  HeadChoice head = HeadChoice::automatic;
  bool drop_tail = false;
  bool cam_true_class = false;
  int cam_clips = 0;                      // 0 = every test clip
  std::string seen_gestures = "auto";     // auto | even | none
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  fs::path output_dir = "runs";
  bool deterministic = false;
  DataConfig data;
  VariantConfig variant;
  net::ModelConfig model;  // in_channels, heads and classes are filled in at train time
  fs::path pretrained;
  train::TrainConfig train;
  EvalConfig eval;
};

ExperimentConfig resolve(const kv::Document& doc);
/// Canonical form: resolve(to_document(c)) reproduces c.
kv::Document to_document(const ExperimentConfig& cfg);

/// Reads the file (if any) and applies `section.key=value` overrides in order.
kv::Document load_document(const std::optional<fs::path>& file, const std::vector<std::string>& overrides);

std::set<int> parse_id_list(std::string_view text, std::string_view what);

struct Partitions {
  corpus::Manifest train, val, test;
  std::set<int> seen_gestures;  // non-empty when training saw only some gestures
};

Partitions make_partitions(const DataConfig& cfg, const corpus::Manifest& m);

// --- artifacts ---------------------------------------------------------------

std::string sha256_file(const fs::path& path);

/// output_dir/<command>/<UTC timestamp>[-n], created on construction.
/// commit() writes config.ini and MANIFEST.sha256 and repoints `latest`.
class ArtifactDir {
 public:
  ArtifactDir(const fs::path& output_dir, std::string_view command);

  const fs::path& path() const noexcept { return dir_; }
  void commit(const kv::Document& resolved_config);

 private:
  fs::path base_;
  fs::path dir_;
};

/// Target of output_dir/<command>/latest, or nullopt.
std::optional<fs::path> latest_dir(const fs::path& output_dir, std::string_view command);

// --- commands ----------------------------------------------------------------

struct RunOptions {
  fs::path out;  // train: extra copy of best.pt; preprocess: packed tensor directory
  std::vector<fs::path> report_inputs;  // report: artifact dirs to summarize
};

/// Runs one command and returns its committed artifact directory.
fs::path run(Command cmd, const ExperimentConfig& cfg, const RunOptions& opts = {});

/// 2 config error, 3 missing prerequisite, 4 anything else.
int exit_code(const Error& e) noexcept;

}  // namespace ehi::cli
