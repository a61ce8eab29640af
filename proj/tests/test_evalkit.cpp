#include <algorithm>
#include <cmath>
#include <memory>
#include <random>

#include <gtest/gtest.h>
#include <torch/torch.h>

#include "ehi/error.hpp"
#include "ehi/evalkit.hpp"
#include "support.hpp"

namespace ehi {
namespace {

using torch::Tensor;
namespace fs = std::filesystem;

// --- windows ---------------------------------------------------------------

TEST(Windows, Examples) {
  EXPECT_EQ(eval::plan_windows(16).offsets, (std::vector<int>{0}));
  EXPECT_EQ(eval::plan_windows(40).offsets, (std::vector<int>{0, 8, 16, 24}));
  EXPECT_EQ(eval::plan_windows(35).offsets, (std::vector<int>{0, 8, 16, 19}));
  EXPECT_EQ(eval::plan_windows(35, true).offsets, (std::vector<int>{0, 8, 16}));
  EXPECT_EQ(eval::plan_windows(3).offsets, (std::vector<int>{0}));
  EXPECT_EQ(eval::plan_windows(3).padded_length, 16);
  EXPECT_THROW(eval::plan_windows(0), Error);
}

TEST(Windows, CoverEveryFrameWithStrideEight) {
  for (int t = 1; t <= 200; ++t) {
    const auto p = eval::plan_windows(t);
    const int len = std::max(t, 16);
    std::vector<int> covered(len, 0);
    for (int off : p.offsets) {
      ASSERT_GE(off, 0);
      ASSERT_LE(off + 16, len) << "T=" << t;
      for (int i = off; i < off + 16; ++i) covered[i] = 1;
    }
    EXPECT_EQ(std::count(covered.begin(), covered.end(), 1), len) << "T=" << t;
    ASSERT_EQ(p.offsets.front(), 0);
    for (std::size_t i = 1; i < p.offsets.size(); ++i) {
      const int step = p.offsets[i] - p.offsets[i - 1];
      if (i + 1 == p.offsets.size() && p.offsets[i] == len - 16) {
        EXPECT_GT(step, 0);
        EXPECT_LE(step, 8);
      } else {
        EXPECT_EQ(step, 8) << "T=" << t;
      }
    }
    EXPECT_EQ(p.offsets.back(), len - 16) << "T=" << t;
  }
}

// --- quantiles and strata ----------------------------------------------------

TEST(Strata, NearestRankQuantile) {
  EXPECT_EQ(eval::nearest_rank_quantile({10, 20, 30, 40}, 0.25), 20);
  EXPECT_EQ(eval::nearest_rank_quantile({40, 30, 20, 10}, 0.75), 40);
  EXPECT_EQ(eval::nearest_rank_quantile({7}, 0.75), 7);
}

TEST(Strata, BoundariesAreHalfOpen) {
  EXPECT_EQ(eval::stratum_of(19, 20, 40), eval::Stratum::short_clips);
  EXPECT_EQ(eval::stratum_of(20, 20, 40), eval::Stratum::medium_clips);
  EXPECT_EQ(eval::stratum_of(39, 20, 40), eval::Stratum::medium_clips);
  EXPECT_EQ(eval::stratum_of(40, 20, 40), eval::Stratum::long_clips);
}

std::vector<eval::Prediction> random_predictions(std::mt19937& rng, int n) {
  std::uniform_int_distribution<int> gesture(1, 6), label(1, 4), len(5, 90);
  std::vector<eval::Prediction> out;
  for (int i = 0; i < n; ++i) {
    eval::Prediction p;
    p.clip_id = "c" + std::to_string(1000 + i);
    p.true_label = label(rng);
    p.predicted_label = rng() % 3 == 0 ? label(rng) : p.true_label;
    p.gesture_id = gesture(rng);
    p.num_frames = len(rng);
    out.push_back(p);
  }
  return out;
}

TEST(Summary, OverallIsTheWeightedMeanOfEveryGrouping) {
  std::mt19937 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    eval::Groupings g;
    g.seen_gestures = {2, 4, 6};
    const auto r = eval::summarize(random_predictions(rng, 37), g);
    for (const auto* groups : {&r.per_gesture, &r.per_stratum, &r.seen_unseen}) {
      int correct = 0, total = 0;
      for (const auto& a : *groups) correct += a.correct, total += a.total;
      EXPECT_EQ(total, r.overall.total);
      EXPECT_EQ(correct, r.overall.correct);
    }
    int diag = 0, sum = 0;
    for (std::size_t i = 0; i < r.confusion.size(); ++i) {
      for (std::size_t j = 0; j < r.confusion[i].size(); ++j) sum += r.confusion[i][j], diag += i == j ? r.confusion[i][j] : 0;
    }
    EXPECT_EQ(sum, 37);
    EXPECT_EQ(diag, r.overall.correct);
    EXPECT_TRUE(std::is_sorted(r.predictions.begin(), r.predictions.end(),
                               [](const auto& a, const auto& b) { return a.clip_id < b.clip_id; }));
  }
}

TEST(Summary, StrataUseLengthQuartiles) {
  std::vector<eval::Prediction> ps;
  for (int len : {10, 20, 30, 40}) ps.push_back({"c" + std::to_string(len), 1, 1, 1, len});
  const auto r = eval::summarize(ps, {});
  EXPECT_EQ(r.q25, 20);
  EXPECT_EQ(r.q75, 40);
  ASSERT_EQ(r.per_stratum.size(), 3u);
  EXPECT_EQ(r.per_stratum[0].total, 1);  // 10
  EXPECT_EQ(r.per_stratum[1].total, 2);  // 20, 30
  EXPECT_EQ(r.per_stratum[2].total, 1);  // 40
  EXPECT_DOUBLE_EQ(r.mean_length, 25.0);
  EXPECT_TRUE(r.seen_unseen.empty());
}

// --- EER -------------------------------------------------------------------------

eval::EerResult eer(const std::vector<double>& pos, const std::vector<double>& neg) {
  std::vector<double> s = pos;
  s.insert(s.end(), neg.begin(), neg.end());
  auto same = std::make_unique<bool[]>(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) same[i] = i < pos.size();
  return eval::equal_error_rate(s, std::span<const bool>(same.get(), s.size()));
}

TEST(Eer, Examples) {
  EXPECT_DOUBLE_EQ(eer({0.9, 0.8}, {0.7, 0.6}).eer, 0.0);
  EXPECT_DOUBLE_EQ(eer({0.9, 0.4}, {0.8, 0.3}).eer, 0.5);
  EXPECT_DOUBLE_EQ(eer({0.5, 0.5, 0.5}, {0.5, 0.5}).eer, 0.5);
  EXPECT_THROW(eer({0.9, 0.4}, {}), Error);
  EXPECT_THROW(eer({}, {0.1}), Error);
}

TEST(Eer, MatchesMidpointOracle) {
  std::mt19937 rng(5);
  for (int set = 0; set < 200; ++set) {
    const int np = 1 + static_cast<int>(rng() % 40), nn = 1 + static_cast<int>(rng() % 40);
    // Coarse grids force ties between and within classes.
    const bool coarse = set % 3 == 0;
    std::normal_distribution<double> p(0.3, 0.3), n(0.0, 0.3);
    std::vector<double> pos, neg;
    auto draw = [&](std::normal_distribution<double>& d) {
      const double v = d(rng);
      return coarse ? std::round(v * 10) / 10 : v;
    };
    for (int i = 0; i < np; ++i) pos.push_back(draw(p));
    for (int i = 0; i < nn; ++i) neg.push_back(draw(n));
    EXPECT_NEAR(eer(pos, neg).eer, testing::brute_force_eer(pos, neg), 1e-9) << "set " << set;
  }
}

TEST(Roc, EndpointsAndMonotone) {
  const std::vector<double> s{0.9, 0.1, 0.5, 0.5, 0.3};
  const bool same[] = {true, false, true, false, false};
  const auto roc = eval::roc_curve(s, same);
  ASSERT_EQ(roc.size(), 5u);  // +inf and 4 distinct scores
  EXPECT_TRUE(std::isinf(roc.front().threshold));
  EXPECT_EQ(roc.front().fpr, 0.0);
  EXPECT_EQ(roc.back().fpr, 1.0);
  EXPECT_EQ(roc.back().tpr, 1.0);
  for (std::size_t i = 1; i < roc.size(); ++i) {
    EXPECT_LT(roc[i].threshold, roc[i - 1].threshold);
    EXPECT_GE(roc[i].fpr, roc[i - 1].fpr);
    EXPECT_GE(roc[i].tpr, roc[i - 1].tpr);
    EXPECT_DOUBLE_EQ(roc[i].fnr, 1.0 - roc[i].tpr);
  }
}

TEST(Cosine, ScaleInvariantAndBounded) {
  torch::manual_seed(2);
  const Tensor a = torch::randn({32}, torch::kFloat64), b = torch::randn({32}, torch::kFloat64);
  const double s = eval::cosine_score(a, b);
  EXPECT_NEAR(eval::cosine_score(a * 2.0, b), s, 1e-12);
  EXPECT_NEAR(eval::cosine_score(a, b * 10.0), s, 1e-12);
  EXPECT_NEAR(eval::cosine_score(a, a), 1.0, 1e-12);
  EXPECT_NEAR(eval::cosine_score(a, -a), -1.0, 1e-12);
  EXPECT_EQ(eval::cosine_score(a, torch::zeros({32}, torch::kFloat64)), 0.0);
}

TEST(Verify, MissingEmbeddingIsReported) {
  corpus::PairSet pairs;
  pairs.pairs.push_back({"a", "b", corpus::PairLabel::same});
  std::map<std::string, Tensor> emb{{"a", torch::ones({4})}};
  EXPECT_THROW(eval::verify_embeddings(pairs, emb), Error);
}

// --- inference --------------------------------------------------------------------

net::VideoResNet small_model() {
  net::ModelConfig c;
  c.width_multiplier = 0.125;
  c.num_subject_classes = 4;
  c.num_gesture_classes = 3;
  c.gesture_head = true;
  torch::manual_seed(3);
  auto m = net::build_model(c);
  m->eval();
  return m;
}

ablate::ClipTensor random_clip(int frames, std::uint64_t seed) {
  std::mt19937 rng(static_cast<unsigned>(seed));
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  ablate::ClipTensor c(frames, 112, 112, 3);
  for (auto& v : c.data) v = u(rng);
  return c;
}

TEST(Predict, ProbabilitiesSumToOne) {
  auto m = small_model();
  for (int t : {16, 24, 35}) {
    const auto p = eval::predict_clip(*m, random_clip(t, t));
    EXPECT_NEAR(p.subject_probs.sum().item<double>(), 1.0, 1e-5);
    EXPECT_NEAR(p.gesture_probs.sum().item<double>(), 1.0, 1e-5);
    EXPECT_EQ(p.features.size(0), m->feature_dim());
  }
  EXPECT_THROW(eval::predict_clip(*m, random_clip(8, 1)), Error);
}

TEST(Predict, AveragesWindowSoftmax) {
  auto m = small_model();
  const auto clip = random_clip(24, 9);
  const auto p = eval::predict_clip(*m, clip);
  torch::NoGradGuard g;
  const Tensor x = net::to_tensor(clip);
  Tensor want = torch::zeros({4}), feat = torch::zeros({m->feature_dim()});
  for (int off : {0, 8}) {
    const auto out = m->forward(x.narrow(1, off, 16).unsqueeze(0));
    want += torch::softmax(out.subject_logits[0], 0) / 2;
    feat += out.features[0] / 2;
  }
  EXPECT_TRUE(torch::allclose(p.subject_probs, want, 1e-5, 1e-6));
  EXPECT_TRUE(torch::allclose(p.features, feat, 1e-5, 1e-6));
  eval::InferenceOptions one;
  one.max_windows_per_batch = 1;
  EXPECT_TRUE(torch::allclose(eval::predict_clip(*m, clip, one).subject_probs, p.subject_probs, 1e-5, 1e-6));
}

TEST(Cam, PeakTieGoesToFirstPixel) {
  const auto p = eval::peak_of(torch::full({112, 112}, 0.5));
  EXPECT_EQ(p.row, 0);
  EXPECT_EQ(p.col, 0);
  Tensor m = torch::zeros({8, 8});
  m[3][5] = 1.0;
  m[6][1] = 1.0;
  const auto q = eval::peak_of(m);
  EXPECT_EQ(q.row, 3);
  EXPECT_EQ(q.col, 5);
  Tensor a = torch::zeros({8, 8}), b = torch::zeros({8, 8});
  a[0][0] = 1.0;
  b[3][4] = 1.0;
  EXPECT_DOUBLE_EQ(eval::peak_distance(a, b), 5.0);
}

TEST(Evaluate, EndToEndOnSyntheticClips) {
  testing::TempDir dir;
  const auto manifest = testing::make_corpus(dir.path(), "clean", 2, 2, 1, 3);
  const auto clips = data::prepare_clips(manifest, {});
  auto m = small_model();
  const data::LabelMap subjects({1, 2, 3, 4});
  const auto r = eval::evaluate(*m, clips, eval::Head::subject, subjects);
  EXPECT_EQ(r.overall.total, static_cast<int>(clips.size()));
  const auto acc = eval::accuracy(*m, clips, eval::Head::subject, subjects);
  ASSERT_TRUE(acc.has_value());
  EXPECT_DOUBLE_EQ(*acc, r.overall.accuracy());
  EXPECT_FALSE(eval::accuracy(*m, clips, eval::Head::subject, data::LabelMap({99})).has_value());

  const auto cam = eval::average_cam(*m, clips, eval::Head::subject, subjects);
  EXPECT_EQ(cam.clips, static_cast<int>(clips.size()));
  EXPECT_EQ(cam.mean_cam.sizes(), (std::vector<std::int64_t>{112, 112}));
  EXPECT_GE(cam.mean_cam.min().item<double>(), 0.0);
  EXPECT_LE(cam.mean_cam.max().item<double>(), 1.0 + 1e-6);
  const Tensor mask = eval::mean_hand_mask(manifest);
  EXPECT_EQ(mask.sizes(), (std::vector<std::int64_t>{112, 112}));
  EXPECT_GT(mask.max().item<double>(), 0.0);

  const auto files = eval::write_eval_report(dir / "report", r);
  for (const auto& f : files) EXPECT_TRUE(fs::exists(f)) << f;
}

}  // namespace
}  // namespace ehi
