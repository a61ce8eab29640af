#pragma once

// Sliding-window inference and the evaluation battery: accuracy tables,
// length strata, seen/unseen gestures, cosine verification (EER/ROC) and
// class-activation-map aggregation.

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "ehi/corpus.hpp"
#include "ehi/dataset.hpp"
#include "ehi/net.hpp"

namespace ehi::eval {

// --- windows ---------------------------------------------------------------

struct WindowPlan {
  std::vector<int> offsets;
  int window_len = 16;
  int stride = 8;
  int padded_length = 16;  // max(T, window_len)
};

/// Offsets 0, 8, 16, ... while offset + 16 <= max(T, 16), plus an
/// end-aligned window at T - 16 when the tail is not covered (unless
/// drop_tail).
WindowPlan plan_windows(int frames, bool drop_tail = false);

enum class Head { subject, gesture };
std::string_view to_string(Head h) noexcept;

struct InferenceOptions {
  bool drop_tail = false;
  int max_windows_per_batch = 16;
};

struct ClipPrediction {
  torch::Tensor subject_probs;  // (classes) or undefined
  torch::Tensor gesture_probs;
  torch::Tensor features;       // (D) window-averaged embedding
  const torch::Tensor& probs(Head h) const { return h == Head::subject ? subject_probs : gesture_probs; }
};

/// `clip` is padded (>= 16 frames) and already cropped for the model.
/// Softmax outputs and pooled features are averaged uniformly over the plan.
ClipPrediction predict_clip(net::VideoResNetImpl& model, const ablate::ClipTensor& clip,
                            const InferenceOptions& opts = {});
torch::Tensor embed_clip(net::VideoResNetImpl& model, const ablate::ClipTensor& clip,
                         const InferenceOptions& opts = {});

// --- accuracy reports --------------------------------------------------------

struct Prediction {
  std::string clip_id;
  int true_label = 0;       // subject or gesture id
  int predicted_label = 0;
  int gesture_id = 0;
  int num_frames = 0;
};

/// sorted[min(N-1, floor(p*N))]: {10,20,30,40} gives 20 at 0.25, 40 at 0.75.
int nearest_rank_quantile(std::vector<int> values, double p);

enum class Stratum { short_clips, medium_clips, long_clips };
std::string_view to_string(Stratum s) noexcept;
/// short < q25 <= medium < q75 <= long.
Stratum stratum_of(int length, int q25, int q75) noexcept;

struct GroupAccuracy {
  std::string key;
  int correct = 0;
  int total = 0;
  double accuracy() const noexcept { return total ? static_cast<double>(correct) / total : 0.0; }
};

struct Groupings {
  bool per_gesture = true;
  bool strata = true;
  std::set<int> seen_gestures;  // non-empty enables the seen/unseen split
};

struct EvalReport {
  std::string head;
  GroupAccuracy overall;
  std::vector<GroupAccuracy> per_gesture;
  std::vector<GroupAccuracy> per_stratum;
  std::vector<GroupAccuracy> seen_unseen;
  int q25 = 0;
  int q75 = 0;
  std::vector<int> labels;                  // confusion row/column ids
  std::vector<std::vector<int>> confusion;  // [true][predicted]
  double mean_length = 0.0;
  double median_length = 0.0;
  std::vector<Prediction> predictions;      // sorted by clip_id
};

EvalReport summarize(std::vector<Prediction> predictions, const Groupings& groupings, std::string head = "subject");

/// Clips are prepared (uncropped); the center view is taken here.
/// Labels are mapped back to ids with `labels`.
EvalReport evaluate(net::VideoResNetImpl& model, const std::vector<data::PreparedClip>& clips, Head head,
                    const data::LabelMap& labels, const Groupings& groupings = {},
                    const InferenceOptions& opts = {});

/// Top-1 accuracy of one head over clips whose label the map knows; empty
/// when there are none.
std::optional<double> accuracy(net::VideoResNetImpl& model, const std::vector<data::PreparedClip>& clips,
                               Head head, const data::LabelMap& labels, const InferenceOptions& opts = {});

// --- verification ------------------------------------------------------------

struct ScoredPair {
  corpus::VerificationPair pair;
  double score = 0.0;
};

struct RocPoint {
  double threshold = 0.0;  // "same" when score >= threshold
  double fpr = 0.0;
  double tpr = 0.0;
  double fnr = 0.0;
};

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

/// Sweeps every distinct score; linear interpolation between adjacent
/// operating points when FPR and FNR cross between them.
EerResult equal_error_rate(std::span<const double> scores, std::span<const bool> same);
/// Operating points from +inf down through every distinct score.
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const bool> same);

struct VerificationReport {
  std::vector<ScoredPair> pairs;
  EerResult eer;
  std::vector<RocPoint> roc;
};

double cosine_score(const torch::Tensor& a, const torch::Tensor& b);

VerificationReport verify_embeddings(const corpus::PairSet& pairs, const std::map<std::string, torch::Tensor>& embeddings);
VerificationReport verify(net::VideoResNetImpl& model, const corpus::PairSet& pairs,
                          const std::vector<data::PreparedClip>& clips, const InferenceOptions& opts = {});

// --- class activation maps -------------------------------------------------

enum class CamClass { predicted, true_class };

struct CamSummary {
  torch::Tensor mean_cam;  // (112, 112)
  int peak_row = 0;
  int peak_col = 0;
  int clips = 0;
};

struct PeakLocation {
  int row = 0;
  int col = 0;
};

/// Argmax of a 2-D map; ties go to the smallest row-major index.
PeakLocation peak_of(const torch::Tensor& map);

/// Per clip: window CAMs bilinearly upsampled to the input size, averaged
/// over time and windows, then min-max normalised; the result is averaged
/// over clips.
CamSummary average_cam(net::VideoResNetImpl& model, const std::vector<data::PreparedClip>& clips, Head head,
                       const data::LabelMap& labels, CamClass cls = CamClass::predicted,
                       const InferenceOptions& opts = {});

/// Mean center-cropped hand mask (112x112) over the clips' frames and clips.
torch::Tensor mean_hand_mask(const corpus::Manifest& m, ablate::OtsuScope scope = ablate::OtsuScope::per_frame);

/// Euclidean pixel distance between the peaks of the two maps.
double peak_distance(const torch::Tensor& mean_cam, const torch::Tensor& mean_mask);

// --- reports and plots -------------------------------------------------------

nlohmann::json to_json(const EvalReport& r);
nlohmann::json to_json(const VerificationReport& r);

/// report.json, per_gesture.csv, per_stratum.csv, seen_unseen.csv,
/// confusion.csv, predictions.csv, length_histogram.svg, per_gesture.svg.
std::vector<std::filesystem::path> write_eval_report(const std::filesystem::path& dir, const EvalReport& r);
/// verification.json, pairs.csv, roc.csv, roc.svg, tradeoff.svg.
std::vector<std::filesystem::path> write_verification_report(const std::filesystem::path& dir,
                                                             const VerificationReport& r);
/// cam.json, mean_cam.csv, mean_mask.csv (when given), cam.svg.
std::vector<std::filesystem::path> write_cam_report(const std::filesystem::path& dir, const CamSummary& cam,
                                                    const torch::Tensor& mean_mask);

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};
std::string svg_line_plot(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                          const std::vector<Series>& series);
std::string svg_bar_chart(const std::string& title, const std::vector<std::string>& labels,
                          const std::vector<double>& values, const std::string& ylabel);
std::string svg_histogram(const std::string& title, const std::vector<int>& values, int bins,
                          const std::string& xlabel);
std::string svg_heatmap(const std::string& title, const torch::Tensor& map);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace ehi::eval
