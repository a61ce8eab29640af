#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ehi/error.hpp"
#include "ehi/evalkit.hpp"

namespace ehi::eval {

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const bool> same) {
  if (scores.size() != same.size()) throw Error(ErrorCode::invalid_argument, "roc_curve: score/label size mismatch");
  const auto pos = static_cast<std::size_t>(std::count(same.begin(), same.end(), true));
  const auto neg = same.size() - pos;
  if (pos == 0 || neg == 0) {
    throw Error(ErrorCode::invalid_argument, "verification needs both same and different pairs; EER is undefined");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  std::vector<RocPoint> roc;
  roc.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0, 1.0});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == s; ++i) (same[order[i]] ? tp : fp)++;
    const double tpr = static_cast<double>(tp) / pos;
    roc.push_back({s, static_cast<double>(fp) / neg, tpr, 1.0 - tpr});
  }
  return roc;
}

EerResult equal_error_rate(std::span<const double> scores, std::span<const bool> same) {
  const auto roc = roc_curve(scores, same);
  for (std::size_t i = 1; i < roc.size(); ++i) {
    const RocPoint& a = roc[i - 1];
    const RocPoint& b = roc[i];
    const double da = a.fnr - a.fpr, db = b.fnr - b.fpr;
    if (db > 0.0) continue;
    if (db == 0.0) return {b.fpr, b.threshold};
    const double alpha = da / (da - db);
    const double thr = std::isinf(a.threshold) ? b.threshold : a.threshold + alpha * (b.threshold - a.threshold);
    return {a.fpr + alpha * (b.fpr - a.fpr), thr};
  }
  return {roc.back().fpr, roc.back().threshold};  // unreachable: the last point has FNR 0, FPR 1
}

double cosine_score(const torch::Tensor& a, const torch::Tensor& b) {
  const torch::Tensor x = a.to(torch::kFloat64).flatten(), y = b.to(torch::kFloat64).flatten();
  const double na = x.norm().item<double>(), nb = y.norm().item<double>();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return x.dot(y).item<double>() / (na * nb);
}

VerificationReport verify_embeddings(const corpus::PairSet& pairs, const std::map<std::string, torch::Tensor>& emb) {
  VerificationReport r;
  const std::size_t n = pairs.pairs.size();
  std::vector<double> scores;
  auto same = std::make_unique<bool[]>(n);  // std::vector<bool> has no contiguous storage
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = pairs.pairs[i];
    auto a = emb.find(p.clip_a), b = emb.find(p.clip_b);
    if (a == emb.end() || b == emb.end()) {
      throw Error(ErrorCode::missing_files, "no embedding for clip " + (a == emb.end() ? p.clip_a : p.clip_b));
    }
    const double s = cosine_score(a->second, b->second);
    r.pairs.push_back({p, s});
    scores.push_back(s);
    same[i] = p.label == corpus::PairLabel::same;
  }
  const std::span<const bool> labels(same.get(), n);
  r.roc = roc_curve(scores, labels);
  r.eer = equal_error_rate(scores, labels);
  return r;
}

VerificationReport verify(net::VideoResNetImpl& model, const corpus::PairSet& pairs,
                          const std::vector<data::PreparedClip>& clips, const InferenceOptions& opts) {
  std::set<std::string> needed;
  for (const auto& p : pairs.pairs) {
    needed.insert(p.clip_a);
    needed.insert(p.clip_b);
  }
  std::map<std::string, torch::Tensor> emb;
  for (const auto& c : clips) {
    if (needed.count(c.clip_id)) emb[c.clip_id] = embed_clip(model, data::test_view(c.clip), opts);
  }
  return verify_embeddings(pairs, emb);
}

}  // namespace ehi::eval
