#include <algorithm>
#include <cmath>
#include <map>

#include "ehi/error.hpp"
#include "ehi/evalkit.hpp"

namespace ehi::eval {

int nearest_rank_quantile(std::vector<int> values, double p) {
  if (values.empty()) throw Error(ErrorCode::invalid_argument, "quantile of an empty set");
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  const auto idx = std::min(n - 1, static_cast<std::size_t>(std::floor(p * static_cast<double>(n))));
  return values[idx];
}

std::string_view to_string(Stratum s) noexcept {
  switch (s) {
    case Stratum::short_clips: return "short";
    case Stratum::medium_clips: return "medium";
    case Stratum::long_clips: return "long";
  }
  return "short";
}

Stratum stratum_of(int length, int q25, int q75) noexcept {
  if (length < q25) return Stratum::short_clips;
  if (length < q75) return Stratum::medium_clips;
  return Stratum::long_clips;
}

EvalReport summarize(std::vector<Prediction> preds, const Groupings& groupings, std::string head) {
  if (preds.empty()) throw Error(ErrorCode::invalid_argument, "evaluation set is empty");
  std::sort(preds.begin(), preds.end(), [](const Prediction& a, const Prediction& b) { return a.clip_id < b.clip_id; });
  EvalReport r;
  r.head = std::move(head);
  r.overall.key = "overall";

  std::map<int, GroupAccuracy> gestures;
  std::vector<int> lengths;
  std::set<int> label_set;
  for (const auto& p : preds) {
    const bool ok = p.true_label == p.predicted_label;
    r.overall.correct += ok;
    ++r.overall.total;
    auto& g = gestures[p.gesture_id];
    g.key = std::to_string(p.gesture_id);
    g.correct += ok;
    ++g.total;
    lengths.push_back(p.num_frames);
    label_set.insert(p.true_label);
    label_set.insert(p.predicted_label);
  }
  if (groupings.per_gesture) {
    for (auto& [id, g] : gestures) r.per_gesture.push_back(g);
  }

  r.q25 = nearest_rank_quantile(lengths, 0.25);
  r.q75 = nearest_rank_quantile(lengths, 0.75);
  if (groupings.strata) {
    std::array<GroupAccuracy, 3> strata;
    for (auto s : {Stratum::short_clips, Stratum::medium_clips, Stratum::long_clips}) {
      strata[static_cast<int>(s)].key = std::string(to_string(s));
    }
    for (const auto& p : preds) {
      auto& g = strata[static_cast<int>(stratum_of(p.num_frames, r.q25, r.q75))];
      g.correct += p.true_label == p.predicted_label;
      ++g.total;
    }
    r.per_stratum.assign(strata.begin(), strata.end());
  }
  if (!groupings.seen_gestures.empty()) {
    GroupAccuracy seen{"seen"}, unseen{"unseen"};
    for (const auto& p : preds) {
      auto& g = groupings.seen_gestures.count(p.gesture_id) ? seen : unseen;
      g.correct += p.true_label == p.predicted_label;
      ++g.total;
    }
    r.seen_unseen = {seen, unseen};
  }

  r.labels.assign(label_set.begin(), label_set.end());
  r.confusion.assign(r.labels.size(), std::vector<int>(r.labels.size(), 0));
  auto pos = [&](int id) { return std::lower_bound(r.labels.begin(), r.labels.end(), id) - r.labels.begin(); };
  for (const auto& p : preds) ++r.confusion[pos(p.true_label)][pos(p.predicted_label)];

  std::vector<int> sorted = lengths;
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (int v : sorted) sum += v;
  r.mean_length = sum / sorted.size();
  const auto n = sorted.size();
  r.median_length = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  r.predictions = std::move(preds);
  return r;
}

namespace {

int true_label(const data::PreparedClip& c, Head h) { return h == Head::subject ? c.subject_id : c.gesture_id; }

int predicted_index(net::VideoResNetImpl& model, const data::PreparedClip& c, Head h, const InferenceOptions& opts) {
  const ClipPrediction p = predict_clip(model, data::test_view(c.clip), opts);
  const torch::Tensor& probs = p.probs(h);
  if (!probs.defined()) {
    throw Error(ErrorCode::invalid_argument, "model has no " + std::string(to_string(h)) + " head");
  }
  return static_cast<int>(probs.argmax().item<std::int64_t>());
}

}  // namespace

EvalReport evaluate(net::VideoResNetImpl& model, const std::vector<data::PreparedClip>& clips, Head head,
                    const data::LabelMap& labels, const Groupings& groupings, const InferenceOptions& opts) {
  if (clips.empty()) throw Error(ErrorCode::invalid_argument, "evaluation manifest is empty");
  std::vector<Prediction> preds;
  for (const auto& c : clips) {
    Prediction p;
    p.clip_id = c.clip_id;
    p.true_label = true_label(c, head);
    p.predicted_label = labels.id_of(predicted_index(model, c, head, opts));
    p.gesture_id = c.gesture_id;
    p.num_frames = c.num_frames;
    preds.push_back(std::move(p));
  }
  return summarize(std::move(preds), groupings, std::string(to_string(head)));
}

std::optional<double> accuracy(net::VideoResNetImpl& model, const std::vector<data::PreparedClip>& clips, Head head,
                               const data::LabelMap& labels, const InferenceOptions& opts) {
  int ok = 0, total = 0;
  for (const auto& c : clips) {
    const int want = labels.index_of(true_label(c, head));
    if (want < 0) continue;
    ok += predicted_index(model, c, head, opts) == want;
    ++total;
  }
  if (total == 0) return std::nullopt;
  return static_cast<double>(ok) / total;
}

}  // namespace ehi::eval
