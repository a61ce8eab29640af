#include <cmath>

#include "ehi/error.hpp"
#include "ehi/evalkit.hpp"

namespace ehi::eval {

using torch::Tensor;

PeakLocation peak_of(const Tensor& map) {
  if (map.dim() != 2 || map.numel() == 0) throw Error(ErrorCode::invalid_argument, "peak_of: expected a 2-D map");
  const Tensor m = map.to(torch::kFloat64).contiguous();
  auto acc = m.accessor<double, 2>();
  PeakLocation best;
  double best_v = acc[0][0];
  for (int i = 0; i < m.size(0); ++i) {
    for (int j = 0; j < m.size(1); ++j) {
      if (acc[i][j] > best_v) {
        best_v = acc[i][j];
        best = {i, j};
      }
    }
  }
  return best;
}

namespace {

Tensor normalize(const Tensor& m) {
  const double lo = m.min().item<double>(), hi = m.max().item<double>();
  return hi > lo ? (m - lo) / (hi - lo) : torch::zeros_like(m);
}

}  // namespace

CamSummary average_cam(net::VideoResNetImpl& model, const std::vector<data::PreparedClip>& clips, Head head,
                       const data::LabelMap& labels, CamClass cls, const InferenceOptions& opts) {
  if (clips.empty()) throw Error(ErrorCode::invalid_argument, "average_cam: no clips");
  torch::nn::Linear fc = head == Head::subject ? model.subject_head() : model.gesture_head();
  if (!fc) throw Error(ErrorCode::invalid_argument, "model has no " + std::string(to_string(head)) + " head");
  torch::NoGradGuard guard;
  model.eval();
  const Tensor weights = fc->weight.detach();

  CamSummary out;
  Tensor sum;
  for (const auto& c : clips) {
    const ablate::ClipTensor view = data::test_view(c.clip);
    const WindowPlan plan = plan_windows(view.frames, opts.drop_tail);
    const Tensor full = net::to_tensor(view);
    std::vector<Tensor> maps;
    Tensor probs;
    for (int off : plan.offsets) {
      const net::NetOutputs o = model.forward(full.narrow(1, off, plan.window_len).unsqueeze(0));
      const Tensor logits = head == Head::subject ? o.subject_logits : o.gesture_logits;
      const Tensor p = torch::softmax(logits[0], 0);
      probs = probs.defined() ? probs + p : p;
      maps.push_back(o.last_maps[0]);
    }
    int cls_index;
    if (cls == CamClass::predicted) {
      cls_index = static_cast<int>(probs.argmax().item<std::int64_t>());
    } else {
      cls_index = labels.index_of(head == Head::subject ? c.subject_id : c.gesture_id);
      if (cls_index < 0) {
        throw Error(ErrorCode::invalid_argument, "clip " + c.clip_id + " has a label the model was not trained on");
      }
    }
    Tensor clip_cam;
    for (const Tensor& m : maps) {
      const Tensor raw = net::compute_cam(m, weights, cls_index).raw;  // (T', h, w)
      const Tensor up = torch::nn::functional::interpolate(
          raw.unsqueeze(1), torch::nn::functional::InterpolateFuncOptions()
                                .size(std::vector<std::int64_t>{view.height, view.width})
                                .mode(torch::kBilinear)
                                .align_corners(false));
      const Tensor t_mean = up.mean({0, 1});
      clip_cam = clip_cam.defined() ? clip_cam + t_mean : t_mean;
    }
    clip_cam = normalize(clip_cam / static_cast<double>(maps.size()));
    sum = sum.defined() ? sum + clip_cam : clip_cam;
    ++out.clips;
  }
  out.mean_cam = sum / static_cast<double>(out.clips);
  const PeakLocation p = peak_of(out.mean_cam);
  out.peak_row = p.row;
  out.peak_col = p.col;
  return out;
}

Tensor mean_hand_mask(const corpus::Manifest& m, ablate::OtsuScope scope) {
  Tensor sum;
  int n = 0;
  for (const auto& r : m.records) {
    if (!r.has_depth) continue;
    const corpus::RawClip raw = corpus::read_clip(m, r);
    const ablate::MaskResult mask = ablate::hand_masks(raw, scope);
    ablate::ClipTensor t(raw.frames, raw.height, raw.width, 1);
    std::copy(mask.mask.begin(), mask.mask.end(), t.data.begin());
    const ablate::ClipTensor view = data::test_view(ablate::resize_clip(t, ablate::kResizeHeight, ablate::kResizeWidth, true));
    const Tensor frames = net::to_tensor(view)[0].mean(0).to(torch::kFloat64);
    sum = sum.defined() ? sum + frames : frames;
    ++n;
  }
  if (n == 0) throw Error(ErrorCode::modality_missing, "mean_hand_mask: no clip with depth");
  return (sum / n).to(torch::kFloat32);
}

double peak_distance(const Tensor& mean_cam, const Tensor& mean_mask) {
  const PeakLocation a = peak_of(mean_cam), b = peak_of(mean_mask);
  return std::hypot(static_cast<double>(a.row - b.row), static_cast<double>(a.col - b.col));
}

}  // namespace ehi::eval
