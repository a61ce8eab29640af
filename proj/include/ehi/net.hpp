#pragma once

// Video ResNet family, classification heads, gradient reversal and CAM.
//
// Inputs are (N, C, T, H, W) float tensors. Parameter names follow the
// common 3D-ResNet layout (conv1, bn1, layer{1..4}.{i}.{conv1,bn1,conv2,bn2,
// downsample.{0,1}}) so Kinetics-pretrained state dicts map one-to-one.
// Heads are `subject_head` and `gesture_head`.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <torch/torch.h>

#include "ehi/ablate.hpp"
#include "ehi/kvconfig.hpp"

namespace ehi::net {

enum class Arch { resnet18_3d, resnet18_2d_avg, tiny3d };

std::string_view to_string(Arch a) noexcept;
Arch parse_arch(std::string_view s);

struct ModelConfig {
  Arch arch = Arch::tiny3d;
  int in_channels = 3;
  double width_multiplier = 1.0;
  int num_subject_classes = 0;
  int num_gesture_classes = 0;
  bool subject_head = true;
  bool gesture_head = false;
  double grl_lambda = 0.1;
};

void validate(const ModelConfig& cfg);
/// Reads/writes the keys of a `[model]` section (unknown keys rejected).
ModelConfig model_config_from_kv(const kv::Section* section, ModelConfig base = {});
void model_config_to_kv(const ModelConfig& cfg, kv::Section& section);

struct NetOutputs {
  torch::Tensor features;        // (N, D) pooled penultimate activations
  torch::Tensor last_maps;       // (N, K, T', h, w), K == D
  torch::Tensor subject_logits;  // (N, subjects) or undefined
  torch::Tensor gesture_logits;  // (N, gestures) or undefined
};

/// Identity forward; multiplies the incoming gradient by -lambda backward.
torch::Tensor grad_reverse(const torch::Tensor& x, double lambda);

class VideoResNetImpl : public torch::nn::Module {
 public:
  explicit VideoResNetImpl(const ModelConfig& cfg);

  /// With `subject_reversal` set, the subject head reads
  /// grad_reverse(features, lambda) instead of the features themselves.
  NetOutputs forward(const torch::Tensor& x, std::optional<double> subject_reversal = std::nullopt);

  torch::Tensor last_maps(const torch::Tensor& x);
  const ModelConfig& config() const noexcept { return cfg_; }
  int feature_dim() const noexcept { return feature_dim_; }
  torch::nn::Linear subject_head() const { return subject_head_; }
  torch::nn::Linear gesture_head() const { return gesture_head_; }

  /// Parameters of the shared trunk (everything except the heads).
  std::vector<torch::Tensor> trunk_parameters() const;

 private:
  ModelConfig cfg_;
  int feature_dim_ = 0;
  torch::nn::AnyModule conv1_, bn1_, pool_;
  bool has_pool_ = false;
  torch::nn::Sequential layer1_{nullptr}, layer2_{nullptr}, layer3_{nullptr}, layer4_{nullptr};
  torch::nn::Linear subject_head_{nullptr}, gesture_head_{nullptr};
};
TORCH_MODULE(VideoResNet);

VideoResNet build_model(const ModelConfig& cfg);
std::int64_t parameter_count(const VideoResNetImpl& model);

/// (T, H, W, C) clip to a (C, T, H, W) tensor.
torch::Tensor to_tensor(const ablate::ClipTensor& clip);

struct CamResult {
  torch::Tensor raw;         // (T', h, w)
  torch::Tensor normalized;  // min-max scaled to [0, 1]; zeros when constant
};

/// M[t,i,j] = sum_k w[c,k] * F[k,t,i,j] for maps F (K, T', h, w) and head
/// weights w (classes, K).
CamResult compute_cam(const torch::Tensor& last_maps, const torch::Tensor& head_weights, int class_index);

// --- Pretrained weights ----------------------------------------------------
//
// The file is a pickled `dict[str, Tensor]` in the zip format of
// `torch.save`, either bare or under a "state_dict" key. A leading
// `module.` is stripped, `fc.*` is ignored, and conv1 is adapted when the
// model has 1 input channel (RGB mean) or 4 (RGB plus RGB mean).

struct PretrainedReport {
  int loaded = 0;
  std::vector<std::string> ignored;  // keys present in the file but unused
  std::vector<std::string> missing;  // model keys the file did not provide
};

PretrainedReport load_pretrained(VideoResNetImpl& model, const std::filesystem::path& path);
torch::Tensor adapt_input_kernel(const torch::Tensor& rgb_kernel, int in_channels);

// --- Checkpoints -----------------------------------------------------------
//
// torch::serialize archive with keys:
//   model_config  kv text of the [model] section
//   config        free-form config echo (full experiment config)
//   epoch         int
//   subject_labels / gesture_labels  int64 tensors mapping class -> id
//   rng_state     CPU generator state
//   params/<canonical name>  parameters and buffers
//   optimizer     nested archive (absent when saved without one)

struct CheckpointMeta {
  std::string config_text;
  int epoch = 0;
  std::vector<int> subject_labels;
  std::vector<int> gesture_labels;
};

void save_checkpoint(const std::filesystem::path& path, VideoResNetImpl& model,
                     torch::optim::Optimizer* optimizer, const CheckpointMeta& meta);

struct LoadedCheckpoint {
  VideoResNet model{nullptr};
  CheckpointMeta meta;
};

/// Rebuilds the model from the stored config and restores its state.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, torch::optim::Optimizer* optimizer = nullptr,
                                 bool restore_rng = false);
/// Restores parameters/optimizer into an existing model of matching config.
CheckpointMeta load_checkpoint_into(const std::filesystem::path& path, VideoResNetImpl& model,
                                    torch::optim::Optimizer* optimizer, bool restore_rng = false);

}  // namespace ehi::net
