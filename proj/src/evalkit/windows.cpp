#include "ehi/error.hpp"
#include "ehi/evalkit.hpp"

namespace ehi::eval {

using torch::Tensor;

std::string_view to_string(Head h) noexcept { return h == Head::subject ? "subject" : "gesture"; }

WindowPlan plan_windows(int frames, bool drop_tail) {
  if (frames < 1) throw Error(ErrorCode::invalid_argument, "plan_windows: clip has no frames");
  WindowPlan p;
  p.padded_length = std::max(frames, p.window_len);
  for (int off = 0; off + p.window_len <= p.padded_length; off += p.stride) p.offsets.push_back(off);
  const int tail = p.padded_length - p.window_len;
  if (!drop_tail && p.offsets.back() < tail) p.offsets.push_back(tail);
  return p;
}

ClipPrediction predict_clip(net::VideoResNetImpl& model, const ablate::ClipTensor& clip, const InferenceOptions& opts) {
  if (clip.frames < ablate::kWindowLength) {
    throw Error(ErrorCode::invalid_argument, "predict_clip: clip has " + std::to_string(clip.frames) +
                                                 " frames; pad to 16 first");
  }
  const WindowPlan plan = plan_windows(clip.frames, opts.drop_tail);
  torch::NoGradGuard guard;
  model.eval();
  const Tensor full = net::to_tensor(clip);
  Tensor subj, gest, feats;
  auto add = [](Tensor& acc, const Tensor& v) { acc = acc.defined() ? acc + v : v; };
  const std::size_t chunk = static_cast<std::size_t>(std::max(1, opts.max_windows_per_batch));
  for (std::size_t i = 0; i < plan.offsets.size(); i += chunk) {
    std::vector<Tensor> xs;
    for (std::size_t j = i; j < std::min(plan.offsets.size(), i + chunk); ++j) {
      xs.push_back(full.narrow(1, plan.offsets[j], plan.window_len));
    }
    const net::NetOutputs out = model.forward(torch::stack(xs));
    add(feats, out.features.sum(0));
    if (out.subject_logits.defined()) add(subj, torch::softmax(out.subject_logits, 1).sum(0));
    if (out.gesture_logits.defined()) add(gest, torch::softmax(out.gesture_logits, 1).sum(0));
  }
  const double n = static_cast<double>(plan.offsets.size());
  ClipPrediction p;
  p.features = feats / n;
  if (subj.defined()) p.subject_probs = subj / n;
  if (gest.defined()) p.gesture_probs = gest / n;
  return p;
}

Tensor embed_clip(net::VideoResNetImpl& model, const ablate::ClipTensor& clip, const InferenceOptions& opts) {
  return predict_clip(model, clip, opts).features;
}

}  // namespace ehi::eval
