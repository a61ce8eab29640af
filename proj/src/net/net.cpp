#include <cmath>
#include <cstdio>

#include "ehi/error.hpp"
#include "ehi/net.hpp"

namespace ehi::net {

using torch::Tensor;

std::string_view to_string(Arch a) noexcept {
  switch (a) {
    case Arch::resnet18_3d: return "resnet18_3d";
    case Arch::resnet18_2d_avg: return "resnet18_2d_avg";
    case Arch::tiny3d: return "tiny3d";
  }
  return "tiny3d";
}

Arch parse_arch(std::string_view s) {
  for (Arch a : {Arch::resnet18_3d, Arch::resnet18_2d_avg, Arch::tiny3d}) {
    if (to_string(a) == s) return a;
  }
  throw Error(ErrorCode::config, "unknown architecture '" + std::string(s) + "'");
}

void validate(const ModelConfig& cfg) {
  if (cfg.in_channels != 1 && cfg.in_channels != 3 && cfg.in_channels != 4) {
    throw Error(ErrorCode::config, "model.in_channels must be 1, 3 or 4, got " + std::to_string(cfg.in_channels));
  }
  if (!(cfg.width_multiplier > 0.0 && cfg.width_multiplier <= 1.0)) {
    throw Error(ErrorCode::config, "model.width_multiplier must be in (0, 1]");
  }
  if (!cfg.subject_head && !cfg.gesture_head) throw Error(ErrorCode::config, "model needs at least one head");
  if (cfg.subject_head && cfg.num_subject_classes < 1) {
    throw Error(ErrorCode::config, "subject head enabled with no subject classes");
  }
  if (cfg.gesture_head && cfg.num_gesture_classes < 1) {
    throw Error(ErrorCode::config, "gesture head enabled with no gesture classes");
  }
  if (!(cfg.grl_lambda >= 0.0)) throw Error(ErrorCode::config, "model.grl_lambda must be >= 0");
}

ModelConfig model_config_from_kv(const kv::Section* section, ModelConfig cfg) {
  kv::SectionReader r(section, "model");
  if (auto a = r.str("arch")) cfg.arch = parse_arch(*a);
  cfg.in_channels = static_cast<int>(r.integer("in_channels", cfg.in_channels));
  cfg.width_multiplier = r.real("width_multiplier", cfg.width_multiplier);
  cfg.num_subject_classes = static_cast<int>(r.integer("num_subject_classes", cfg.num_subject_classes));
  cfg.num_gesture_classes = static_cast<int>(r.integer("num_gesture_classes", cfg.num_gesture_classes));
  cfg.subject_head = r.boolean("subject_head", cfg.subject_head);
  cfg.gesture_head = r.boolean("gesture_head", cfg.gesture_head);
  cfg.grl_lambda = r.real("grl_lambda", cfg.grl_lambda);
  r.finish();
  validate(cfg);
  return cfg;
}

void model_config_to_kv(const ModelConfig& cfg, kv::Section& s) {
  auto real = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  s.set("arch", std::string(to_string(cfg.arch)));
  s.set("in_channels", std::to_string(cfg.in_channels));
  s.set("width_multiplier", real(cfg.width_multiplier));
  s.set("num_subject_classes", std::to_string(cfg.num_subject_classes));
  s.set("num_gesture_classes", std::to_string(cfg.num_gesture_classes));
  s.set("subject_head", cfg.subject_head ? "true" : "false");
  s.set("gesture_head", cfg.gesture_head ? "true" : "false");
  s.set("grl_lambda", real(cfg.grl_lambda));
}

// --- gradient reversal -----------------------------------------------------

namespace {

struct GradReverseFn : public torch::autograd::Function<GradReverseFn> {
  static Tensor forward(torch::autograd::AutogradContext* ctx, const Tensor& x, double lambda) {
    ctx->saved_data["lambda"] = lambda;
    return x.clone();
  }
  static torch::autograd::variable_list backward(torch::autograd::AutogradContext* ctx,
                                                 torch::autograd::variable_list grad) {
    const double lambda = ctx->saved_data["lambda"].toDouble();
    return {grad[0] * -lambda, Tensor()};
  }
};

}  // namespace

Tensor grad_reverse(const Tensor& x, double lambda) { return GradReverseFn::apply(x, lambda); }

// --- network ---------------------------------------------------------------

namespace {

template <std::size_t D>
struct Dim;
template <>
struct Dim<3> {
  using Conv = torch::nn::Conv3d;
  using BN = torch::nn::BatchNorm3d;
};
template <>
struct Dim<2> {
  using Conv = torch::nn::Conv2d;
  using BN = torch::nn::BatchNorm2d;
};

template <std::size_t D>
class BasicBlock : public torch::nn::Module {
 public:
  using Conv = typename Dim<D>::Conv;
  using BN = typename Dim<D>::BN;

  BasicBlock(int in, int out, int stride) {
    conv1_ = register_module("conv1", Conv(torch::nn::ConvOptions<D>(in, out, 3).stride(stride).padding(1).bias(false)));
    bn1_ = register_module("bn1", BN(out));
    conv2_ = register_module("conv2", Conv(torch::nn::ConvOptions<D>(out, out, 3).padding(1).bias(false)));
    bn2_ = register_module("bn2", BN(out));
    if (stride != 1 || in != out) {
      downsample_ = register_module(
          "downsample",
          torch::nn::Sequential(Conv(torch::nn::ConvOptions<D>(in, out, 1).stride(stride).bias(false)), BN(out)));
    }
  }

  Tensor forward(const Tensor& x) {
    Tensor h = torch::relu(bn1_->forward(conv1_->forward(x)));
    h = bn2_->forward(conv2_->forward(h));
    const Tensor skip = downsample_ ? downsample_->forward(x) : x;
    return torch::relu(h + skip);
  }

 private:
  Conv conv1_{nullptr}, conv2_{nullptr};
  BN bn1_{nullptr}, bn2_{nullptr};
  torch::nn::Sequential downsample_{nullptr};
};

template <std::size_t D>
torch::nn::Sequential make_layer(int in, int out, int blocks, int stride) {
  torch::nn::Sequential seq;
  for (int i = 0; i < blocks; ++i) {
    seq->push_back(std::make_shared<BasicBlock<D>>(i == 0 ? in : out, out, i == 0 ? stride : 1));
  }
  return seq;
}

}  // namespace

VideoResNetImpl::VideoResNetImpl(const ModelConfig& cfg) : cfg_(cfg) {
  validate(cfg);
  const double wm = cfg.width_multiplier;
  int widths[4];
  for (int i = 0; i < 4; ++i) widths[i] = std::max(1, static_cast<int>(std::lround((64 << i) * wm)));
  feature_dim_ = widths[3];
  const int C = cfg.in_channels;

  if (cfg.arch == Arch::resnet18_2d_avg) {
    conv1_ = torch::nn::AnyModule(
        torch::nn::Conv2d(torch::nn::Conv2dOptions(C, widths[0], 7).stride(2).padding(3).bias(false)));
    bn1_ = torch::nn::AnyModule(torch::nn::BatchNorm2d(widths[0]));
    pool_ = torch::nn::AnyModule(torch::nn::MaxPool2d(torch::nn::MaxPool2dOptions(3).stride(2).padding(1)));
    has_pool_ = true;
    layer1_ = make_layer<2>(widths[0], widths[0], 2, 1);
    layer2_ = make_layer<2>(widths[0], widths[1], 2, 2);
    layer3_ = make_layer<2>(widths[1], widths[2], 2, 2);
    layer4_ = make_layer<2>(widths[2], widths[3], 2, 2);
  } else if (cfg.arch == Arch::resnet18_3d) {
    conv1_ = torch::nn::AnyModule(torch::nn::Conv3d(
        torch::nn::Conv3dOptions(C, widths[0], 7).stride({1, 2, 2}).padding(3).bias(false)));
    bn1_ = torch::nn::AnyModule(torch::nn::BatchNorm3d(widths[0]));
    pool_ = torch::nn::AnyModule(torch::nn::MaxPool3d(torch::nn::MaxPool3dOptions(3).stride(2).padding(1)));
    has_pool_ = true;
    layer1_ = make_layer<3>(widths[0], widths[0], 2, 1);
    layer2_ = make_layer<3>(widths[0], widths[1], 2, 2);
    layer3_ = make_layer<3>(widths[1], widths[2], 2, 2);
    layer4_ = make_layer<3>(widths[2], widths[3], 2, 2);
  } else {
    // One block per stage behind a strided stem: cheap enough for CI.
    conv1_ = torch::nn::AnyModule(torch::nn::Conv3d(
        torch::nn::Conv3dOptions(C, widths[0], {3, 7, 7}).stride({2, 4, 4}).padding({1, 3, 3}).bias(false)));
    bn1_ = torch::nn::AnyModule(torch::nn::BatchNorm3d(widths[0]));
    layer1_ = make_layer<3>(widths[0], widths[0], 1, 1);
    layer2_ = make_layer<3>(widths[0], widths[1], 1, 2);
    layer3_ = make_layer<3>(widths[1], widths[2], 1, 2);
    layer4_ = make_layer<3>(widths[2], widths[3], 1, 2);
  }
  register_module("conv1", conv1_.ptr());
  register_module("bn1", bn1_.ptr());
  if (has_pool_) register_module("maxpool", pool_.ptr());
  register_module("layer1", layer1_);
  register_module("layer2", layer2_);
  register_module("layer3", layer3_);
  register_module("layer4", layer4_);

  for (auto& m : modules(/*include_self=*/false)) {
    if (auto* c = m->as<torch::nn::Conv3d>()) {
      torch::nn::init::kaiming_normal_(c->weight, 0.0, torch::kFanOut, torch::kReLU);
    } else if (auto* c2 = m->as<torch::nn::Conv2d>()) {
      torch::nn::init::kaiming_normal_(c2->weight, 0.0, torch::kFanOut, torch::kReLU);
    } else if (auto* b = m->as<torch::nn::BatchNorm3d>()) {
      torch::nn::init::ones_(b->weight);
      torch::nn::init::zeros_(b->bias);
    } else if (auto* b2 = m->as<torch::nn::BatchNorm2d>()) {
      torch::nn::init::ones_(b2->weight);
      torch::nn::init::zeros_(b2->bias);
    }
  }

  if (cfg.subject_head) {
    subject_head_ = register_module("subject_head", torch::nn::Linear(feature_dim_, cfg.num_subject_classes));
  }
  if (cfg.gesture_head) {
    gesture_head_ = register_module("gesture_head", torch::nn::Linear(feature_dim_, cfg.num_gesture_classes));
  }
}

Tensor VideoResNetImpl::last_maps(const Tensor& x) {
  if (x.dim() != 5 || x.size(1) != cfg_.in_channels) {
    throw Error(ErrorCode::invalid_argument, "model expects (N, " + std::to_string(cfg_.in_channels) +
                                                 ", T, H, W) input, got " + std::to_string(x.dim()) +
                                                 "-d tensor with " + std::to_string(x.dim() > 1 ? x.size(1) : 0) +
                                                 " channels");
  }
  const bool per_frame = cfg_.arch == Arch::resnet18_2d_avg;
  const auto N = x.size(0), T = x.size(2);
  Tensor h = per_frame ? x.permute({0, 2, 1, 3, 4}).reshape({N * T, x.size(1), x.size(3), x.size(4)}) : x;
  h = torch::relu(bn1_.forward(conv1_.forward(h)));
  if (has_pool_) h = pool_.forward(h);
  h = layer4_->forward(layer3_->forward(layer2_->forward(layer1_->forward(h))));
  if (per_frame) h = h.view({N, T, h.size(1), h.size(2), h.size(3)}).permute({0, 2, 1, 3, 4});
  return h;
}

NetOutputs VideoResNetImpl::forward(const Tensor& x, std::optional<double> subject_reversal) {
  NetOutputs out;
  out.last_maps = last_maps(x);
  out.features = out.last_maps.mean({2, 3, 4});
  if (subject_head_) {
    out.subject_logits = subject_head_->forward(
        subject_reversal ? grad_reverse(out.features, *subject_reversal) : out.features);
  }
  if (gesture_head_) out.gesture_logits = gesture_head_->forward(out.features);
  return out;
}

std::vector<Tensor> VideoResNetImpl::trunk_parameters() const {
  std::vector<Tensor> out;
  for (const auto& p : named_parameters()) {
    if (p.key().rfind("subject_head.", 0) == 0 || p.key().rfind("gesture_head.", 0) == 0) continue;
    out.push_back(p.value());
  }
  return out;
}

VideoResNet build_model(const ModelConfig& cfg) { return VideoResNet(cfg); }

std::int64_t parameter_count(const VideoResNetImpl& model) {
  std::int64_t n = 0;
  for (const auto& p : model.parameters()) n += p.numel();
  return n;
}

Tensor to_tensor(const ablate::ClipTensor& clip) {
  auto* data = const_cast<float*>(clip.data.data());
  return torch::from_blob(data, {clip.frames, clip.height, clip.width, clip.channels}, torch::kFloat32)
      .permute({3, 0, 1, 2})
      .clone(torch::MemoryFormat::Contiguous);
}

CamResult compute_cam(const Tensor& last_maps, const Tensor& head_weights, int class_index) {
  if (last_maps.dim() != 4 || head_weights.dim() != 2 || head_weights.size(1) != last_maps.size(0)) {
    throw Error(ErrorCode::invalid_argument, "compute_cam: expected maps (K,T,h,w) and weights (classes,K)");
  }
  if (class_index < 0 || class_index >= head_weights.size(0)) {
    throw Error(ErrorCode::invalid_argument, "compute_cam: class index " + std::to_string(class_index) +
                                                 " out of range [0, " + std::to_string(head_weights.size(0)) + ")");
  }
  CamResult r;
  r.raw = torch::tensordot(head_weights[class_index], last_maps, {0}, {0});
  const double lo = r.raw.min().item<double>(), hi = r.raw.max().item<double>();
  r.normalized = hi > lo ? (r.raw - lo) / (hi - lo) : torch::zeros_like(r.raw);
  return r;
}

}  // namespace ehi::net
