#pragma once

// Single-task, joint and adversarial training with Adam and a step decay.
//
// Adversarial training realizes "minimize L_g - lambda * L_p over the shared
// trunk and gesture head, minimize L_p over the subject head" in one backward
// pass: the subject head reads grad_reverse(features, lambda), so the trunk
// receives grad(L_g) - lambda * grad(L_p) while the head descends on L_p.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "ehi/ablate.hpp"
#include "ehi/dataset.hpp"
#include "ehi/kvconfig.hpp"
#include "ehi/net.hpp"

namespace ehi::train {

enum class Objective { single_subject, single_gesture, joint, adversarial };
std::string_view to_string(Objective o) noexcept;
/// Accepts subject, gesture, joint, adversarial (and the single_* names).
Objective parse_objective(std::string_view s);

struct TrainConfig {
  Objective objective = Objective::single_subject;
  int batch_size = 32;
  double lr = 1e-4;
  int epochs = 20;
  int lr_decay_epoch = 10;   // 0-based epoch index at which the decay applies
  double lr_decay_factor = 0.1;
  double lambda = 0.1;
  bool lambda_warmup = false;  // linear ramp over the first epoch
  bool literal_alternation = false;
  std::uint64_t seed = 1;
  ablate::InputVariant variant = ablate::InputVariant::rgb;
};

void validate(const TrainConfig& cfg);
TrainConfig train_config_from_kv(const kv::Section* section, TrainConfig base = {});
void train_config_to_kv(const TrainConfig& cfg, kv::Section& section);

double learning_rate_at(const TrainConfig& cfg, int epoch);
/// lambda for step `step_in_epoch` of `epoch` given `steps_per_epoch`.
double lambda_at(const TrainConfig& cfg, int epoch, int step_in_epoch, int steps_per_epoch);

/// Mean cross-entropy; labels are class indices.
torch::Tensor loss_classification(const torch::Tensor& logits, const torch::Tensor& labels);
torch::Tensor loss_joint(const torch::Tensor& loss_g, const torch::Tensor& loss_p);

struct Batch {
  torch::Tensor inputs;   // (N, C, 16, 112, 112)
  torch::Tensor subject;  // (N) class indices
  torch::Tensor gesture;
};

struct StepLosses {
  double loss_g = 0.0;
  double loss_p = 0.0;
  double total = 0.0;
  int correct = 0;  // primary-head hits in the batch
  int count = 0;
};

StepLosses step_single(net::VideoResNetImpl& model, torch::optim::Optimizer& opt, const Batch& b, Objective which);
StepLosses step_joint(net::VideoResNetImpl& model, torch::optim::Optimizer& opt, const Batch& b);
/// Single backward through the reversal connector. Throws for lambda < 0.
StepLosses step_adversarial(net::VideoResNetImpl& model, torch::optim::Optimizer& opt, const Batch& b, double lambda);
/// Two-phase form: `shared` (trunk + gesture head) steps on L_g - lambda*L_p,
/// then `subject_head` steps on L_p over detached features.
StepLosses step_adversarial_literal(net::VideoResNetImpl& model, torch::optim::Optimizer& shared,
                                    torch::optim::Optimizer& subject_head, const Batch& b, double lambda);

struct StepRecord {
  int step = 0;
  int epoch = 0;
  double loss_g = 0.0;
  double loss_p = 0.0;
  double total = 0.0;
  double lr = 0.0;
};

struct EpochRecord {
  int epoch = 0;
  double loss_g = 0.0;
  double loss_p = 0.0;
  double total = 0.0;
  double lr = 0.0;
  double lambda = 0.0;
  double train_accuracy = 0.0;
  std::optional<double> val_accuracy;          // primary head
  std::optional<double> val_subject_accuracy;  // subject head, when present
};

struct LossReport {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  double best_val_accuracy = 0.0;

  void write_csv(const std::filesystem::path& path) const;
  void write_json(const std::filesystem::path& path) const;
  std::string csv() const;
};

struct TrainResult {
  net::VideoResNet final_model{nullptr};
  net::VideoResNet best_model{nullptr};  // same as final when no validation set
  data::LabelMap subjects;
  data::LabelMap gestures;
  LossReport report;
};

struct TrainHooks {
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Builds the model (in_channels, classes and heads filled in from the
/// variant, the data and the objective) and trains it.
TrainResult train(const net::ModelConfig& model_cfg, const TrainConfig& cfg,
                  const std::vector<data::PreparedClip>& train_clips,
                  const std::vector<data::PreparedClip>& val_clips, const TrainHooks& hooks = {},
                  const std::filesystem::path& pretrained = {});

/// Label maps in checkpoint meta form.
net::CheckpointMeta checkpoint_meta(const TrainResult& r, std::string config_text, int epoch);

/// Copies all parameters and buffers from `src` into `dst` (same config).
void copy_state(const net::VideoResNetImpl& src, net::VideoResNetImpl& dst);

// --- subject probe -----------------------------------------------------------

struct ProbeOptions {
  int epochs = 300;
  double lr = 0.05;
  double weight_decay = 1e-3;
  std::uint64_t seed = 1;
};

struct ProbeResult {
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  int classes = 0;
};

/// Multinomial logistic regression on standardized frozen features.
ProbeResult linear_probe(const torch::Tensor& train_features, const std::vector<int>& train_labels,
                         const torch::Tensor& test_features, const std::vector<int>& test_labels,
                         const ProbeOptions& opts = {});

/// Embeds both clip sets with `model` and probes subject identity.
ProbeResult subject_probe(net::VideoResNetImpl& model, const std::vector<data::PreparedClip>& fit_clips,
                          const std::vector<data::PreparedClip>& test_clips, const ProbeOptions& opts = {});

/// Forces single-threaded, deterministic kernels.
void set_deterministic(bool on);
bool deterministic_from_env();

}  // namespace ehi::train
