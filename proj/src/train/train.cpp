#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ehi/error.hpp"
#include "ehi/evalkit.hpp"
#include "ehi/log.hpp"
#include "ehi/train.hpp"

namespace ehi::train {

using torch::Tensor;

std::string_view to_string(Objective o) noexcept {
  switch (o) {
    case Objective::single_subject: return "subject";
    case Objective::single_gesture: return "gesture";
    case Objective::joint: return "joint";
    case Objective::adversarial: return "adversarial";
  }
  return "subject";
}

Objective parse_objective(std::string_view s) {
  if (s == "subject" || s == "single_subject") return Objective::single_subject;
  if (s == "gesture" || s == "single_gesture") return Objective::single_gesture;
  if (s == "joint") return Objective::joint;
  if (s == "adversarial") return Objective::adversarial;
  throw Error(ErrorCode::config, "unknown objective '" + std::string(s) + "' (subject|gesture|joint|adversarial)");
}

void validate(const TrainConfig& cfg) {
  if (cfg.batch_size < 1) throw Error(ErrorCode::config, "train.batch_size must be >= 1");
  if (!(cfg.lr > 0.0)) throw Error(ErrorCode::config, "train.lr must be > 0");
  if (cfg.epochs < 1) throw Error(ErrorCode::config, "train.epochs must be >= 1");
  if (cfg.lr_decay_epoch < 0) throw Error(ErrorCode::config, "train.lr_decay_epoch must be >= 0");
  if (!(cfg.lr_decay_factor > 0.0)) throw Error(ErrorCode::config, "train.lr_decay_factor must be > 0");
  if (!(cfg.lambda >= 0.0)) throw Error(ErrorCode::config, "train.lambda must be >= 0");
}

TrainConfig train_config_from_kv(const kv::Section* section, TrainConfig cfg) {
  kv::SectionReader r(section, "train");
  if (auto o = r.str("objective")) cfg.objective = parse_objective(*o);
  cfg.batch_size = static_cast<int>(r.integer("batch_size", cfg.batch_size));
  cfg.lr = r.real("lr", cfg.lr);
  cfg.epochs = static_cast<int>(r.integer("epochs", cfg.epochs));
  cfg.lr_decay_epoch = static_cast<int>(r.integer("lr_decay_epoch", cfg.lr_decay_epoch));
  cfg.lr_decay_factor = r.real("lr_decay_factor", cfg.lr_decay_factor);
  cfg.lambda = r.real("lambda", cfg.lambda);
  cfg.lambda_warmup = r.boolean("lambda_warmup", cfg.lambda_warmup);
  cfg.literal_alternation = r.boolean("literal_alternation", cfg.literal_alternation);
  cfg.seed = static_cast<std::uint64_t>(r.integer("seed", static_cast<long long>(cfg.seed)));
  r.finish();
  validate(cfg);
  return cfg;
}

void train_config_to_kv(const TrainConfig& cfg, kv::Section& s) {
  auto real = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  s.set("objective", std::string(to_string(cfg.objective)));
  s.set("batch_size", std::to_string(cfg.batch_size));
  s.set("lr", real(cfg.lr));
  s.set("epochs", std::to_string(cfg.epochs));
  s.set("lr_decay_epoch", std::to_string(cfg.lr_decay_epoch));
  s.set("lr_decay_factor", real(cfg.lr_decay_factor));
  s.set("lambda", real(cfg.lambda));
  s.set("lambda_warmup", cfg.lambda_warmup ? "true" : "false");
  s.set("literal_alternation", cfg.literal_alternation ? "true" : "false");
  s.set("seed", std::to_string(cfg.seed));
}

double learning_rate_at(const TrainConfig& cfg, int epoch) {
  return epoch >= cfg.lr_decay_epoch ? cfg.lr * cfg.lr_decay_factor : cfg.lr;
}

double lambda_at(const TrainConfig& cfg, int epoch, int step_in_epoch, int steps_per_epoch) {
  if (!cfg.lambda_warmup || epoch > 0 || steps_per_epoch < 1) return cfg.lambda;
  return cfg.lambda * std::min(1.0, static_cast<double>(step_in_epoch + 1) / steps_per_epoch);
}

Tensor loss_classification(const Tensor& logits, const Tensor& labels) {
  if (logits.dim() != 2 || labels.dim() != 1 || labels.size(0) != logits.size(0)) {
    throw Error(ErrorCode::invalid_argument, "loss_classification: expected logits (N, classes) and labels (N)");
  }
  if (labels.numel() > 0) {
    const auto lo = labels.min().item<std::int64_t>(), hi = labels.max().item<std::int64_t>();
    if (lo < 0 || hi >= logits.size(1)) {
      throw Error(ErrorCode::invalid_argument, "loss_classification: label out of range [0, " +
                                                   std::to_string(logits.size(1)) + ")");
    }
  }
  return torch::nn::functional::cross_entropy(logits, labels);
}

Tensor loss_joint(const Tensor& loss_g, const Tensor& loss_p) { return loss_g + loss_p; }

namespace {

int hits(const Tensor& logits, const Tensor& labels) {
  return static_cast<int>(logits.argmax(1).eq(labels).sum().item<std::int64_t>());
}

}  // namespace

StepLosses step_single(net::VideoResNetImpl& model, torch::optim::Optimizer& opt, const Batch& b, Objective which) {
  model.train();
  opt.zero_grad();
  net::NetOutputs out = model.forward(b.inputs);
  StepLosses s;
  s.count = static_cast<int>(b.inputs.size(0));
  Tensor loss;
  if (which == Objective::single_subject) {
    loss = loss_classification(out.subject_logits, b.subject);
    s.loss_p = loss.item<double>();
    s.correct = hits(out.subject_logits, b.subject);
  } else {
    loss = loss_classification(out.gesture_logits, b.gesture);
    s.loss_g = loss.item<double>();
    s.correct = hits(out.gesture_logits, b.gesture);
  }
  s.total = loss.item<double>();
  loss.backward();
  opt.step();
  return s;
}

StepLosses step_joint(net::VideoResNetImpl& model, torch::optim::Optimizer& opt, const Batch& b) {
  model.train();
  opt.zero_grad();
  net::NetOutputs out = model.forward(b.inputs);
  const Tensor lg = loss_classification(out.gesture_logits, b.gesture);
  const Tensor lp = loss_classification(out.subject_logits, b.subject);
  const Tensor loss = loss_joint(lg, lp);
  loss.backward();
  opt.step();
  StepLosses s;
  s.loss_g = lg.item<double>();
  s.loss_p = lp.item<double>();
  s.total = loss.item<double>();
  s.correct = hits(out.gesture_logits, b.gesture);
  s.count = static_cast<int>(b.inputs.size(0));
  return s;
}

StepLosses step_adversarial(net::VideoResNetImpl& model, torch::optim::Optimizer& opt, const Batch& b, double lambda) {
  if (!(lambda >= 0.0)) throw Error(ErrorCode::invalid_argument, "adversarial lambda must be >= 0");
  model.train();
  opt.zero_grad();
  net::NetOutputs out = model.forward(b.inputs, lambda);
  const Tensor lg = loss_classification(out.gesture_logits, b.gesture);
  const Tensor lp = loss_classification(out.subject_logits, b.subject);
  (lg + lp).backward();
  opt.step();
  StepLosses s;
  s.loss_g = lg.item<double>();
  s.loss_p = lp.item<double>();
  s.total = s.loss_g - lambda * s.loss_p;
  s.correct = hits(out.gesture_logits, b.gesture);
  s.count = static_cast<int>(b.inputs.size(0));
  return s;
}

StepLosses step_adversarial_literal(net::VideoResNetImpl& model, torch::optim::Optimizer& shared,
                                    torch::optim::Optimizer& subject_head, const Batch& b, double lambda) {
  if (!(lambda >= 0.0)) throw Error(ErrorCode::invalid_argument, "adversarial lambda must be >= 0");
  model.train();
  shared.zero_grad();
  subject_head.zero_grad();
  net::NetOutputs out = model.forward(b.inputs);
  const Tensor lg = loss_classification(out.gesture_logits, b.gesture);
  const Tensor lp = loss_classification(out.subject_logits, b.subject);
  (lg - lambda * lp).backward();
  shared.step();

  subject_head.zero_grad();
  const Tensor lp_head = loss_classification(model.subject_head()->forward(out.features.detach()), b.subject);
  lp_head.backward();
  subject_head.step();

  StepLosses s;
  s.loss_g = lg.item<double>();
  s.loss_p = lp.item<double>();
  s.total = s.loss_g - lambda * s.loss_p;
  s.correct = hits(out.gesture_logits, b.gesture);
  s.count = static_cast<int>(b.inputs.size(0));
  return s;
}

// --- loss report -------------------------------------------------------------

std::string LossReport::csv() const {
  std::ostringstream out;
  out << "step,epoch,L_g,L_p,total,lr\n";
  char buf[256];
  for (const auto& s : steps) {
    std::snprintf(buf, sizeof buf, "%d,%d,%.9g,%.9g,%.9g,%.9g\n", s.step, s.epoch, s.loss_g, s.loss_p, s.total, s.lr);
    out << buf;
  }
  return out.str();
}

void LossReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << csv();
}

void LossReport::write_json(const std::filesystem::path& path) const {
  nlohmann::json j;
  j["best_epoch"] = best_epoch;
  j["best_val_accuracy"] = best_val_accuracy;
  j["steps"] = steps.size();
  auto& arr = j["epochs"] = nlohmann::json::array();
  for (const auto& e : epochs) {
    nlohmann::json row = {{"epoch", e.epoch},   {"L_g", e.loss_g},          {"L_p", e.loss_p},
                          {"total", e.total},   {"lr", e.lr},               {"lambda", e.lambda},
                          {"train_accuracy", e.train_accuracy}};
    row["val_accuracy"] = e.val_accuracy ? nlohmann::json(*e.val_accuracy) : nlohmann::json(nullptr);
    row["val_subject_accuracy"] =
        e.val_subject_accuracy ? nlohmann::json(*e.val_subject_accuracy) : nlohmann::json(nullptr);
    arr.push_back(row);
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << j.dump(2) << "\n";
}

// --- training loop -------------------------------------------------------------

void copy_state(const net::VideoResNetImpl& src, net::VideoResNetImpl& dst) {
  torch::NoGradGuard guard;
  auto dp = dst.named_parameters();
  for (const auto& p : src.named_parameters()) dp[p.key()].copy_(p.value());
  auto db = dst.named_buffers();
  for (const auto& b : src.named_buffers()) db[b.key()].copy_(b.value());
}

namespace {

void set_lr(torch::optim::Optimizer& opt, double lr) {
  for (auto& g : opt.param_groups()) static_cast<torch::optim::AdamOptions&>(g.options()).lr(lr);
}

Batch make_batch(const std::vector<data::PreparedClip>& clips, std::span<const std::size_t> idx,
                 const data::LabelMap& subjects, const data::LabelMap& gestures, std::uint64_t seed, int epoch) {
  std::vector<Tensor> xs;
  std::vector<std::int64_t> subj, gest;
  for (std::size_t i : idx) {
    const auto& c = clips[i];
    xs.push_back(net::to_tensor(data::training_sample(c.clip, data::mix_seed(seed, static_cast<std::uint64_t>(epoch), i))));
    subj.push_back(std::max(0, subjects.index_of(c.subject_id)));
    gest.push_back(std::max(0, gestures.index_of(c.gesture_id)));
  }
  Batch b;
  b.inputs = torch::stack(xs);
  b.subject = torch::tensor(subj, torch::kLong);
  b.gesture = torch::tensor(gest, torch::kLong);
  return b;
}

}  // namespace

TrainResult train(const net::ModelConfig& model_cfg, const TrainConfig& cfg,
                  const std::vector<data::PreparedClip>& train_clips,
                  const std::vector<data::PreparedClip>& val_clips, const TrainHooks& hooks,
                  const std::filesystem::path& pretrained) {
  validate(cfg);
  if (train_clips.empty()) throw Error(ErrorCode::invalid_argument, "training manifest is empty");
  const int C = ablate::channels(cfg.variant);
  for (const auto* set : {&train_clips, &val_clips}) {
    for (const auto& c : *set) {
      if (c.clip.channels != C) {
        throw Error(ErrorCode::invalid_argument, "clip " + c.clip_id + " has " + std::to_string(c.clip.channels) +
                                                     " channels; variant " +
                                                     std::string(ablate::to_string(cfg.variant)) + " needs " +
                                                     std::to_string(C));
      }
    }
  }

  TrainResult r;
  r.subjects = data::LabelMap::subjects(train_clips);
  r.gestures = data::LabelMap::gestures(train_clips);

  net::ModelConfig mc = model_cfg;
  mc.in_channels = C;
  mc.subject_head = cfg.objective != Objective::single_gesture;
  mc.gesture_head = cfg.objective != Objective::single_subject;
  mc.num_subject_classes = mc.subject_head ? r.subjects.size() : 0;
  mc.num_gesture_classes = mc.gesture_head ? r.gestures.size() : 0;
  mc.grl_lambda = cfg.lambda;

  torch::manual_seed(cfg.seed);
  r.final_model = net::build_model(mc);
  net::VideoResNetImpl& model = *r.final_model;
  if (!pretrained.empty()) {
    const auto rep = net::load_pretrained(model, pretrained);
    log::info("pretrained weights: %d tensors loaded, %zu ignored, %zu missing", rep.loaded, rep.ignored.size(),
              rep.missing.size());
  }
  r.best_model = net::build_model(mc);

  std::unique_ptr<torch::optim::Adam> opt, head_opt;
  if (cfg.objective == Objective::adversarial && cfg.literal_alternation) {
    std::vector<Tensor> shared = model.trunk_parameters();
    for (const auto& p : model.gesture_head()->parameters()) shared.push_back(p);
    opt = std::make_unique<torch::optim::Adam>(shared, torch::optim::AdamOptions(cfg.lr));
    head_opt = std::make_unique<torch::optim::Adam>(model.subject_head()->parameters(), torch::optim::AdamOptions(cfg.lr));
  } else {
    opt = std::make_unique<torch::optim::Adam>(model.parameters(), torch::optim::AdamOptions(cfg.lr));
  }

  const eval::Head primary = cfg.objective == Objective::single_subject ? eval::Head::subject : eval::Head::gesture;
  const data::LabelMap& primary_labels = primary == eval::Head::subject ? r.subjects : r.gestures;

  const std::size_t n = train_clips.size();
  const int steps_per_epoch = static_cast<int>((n + cfg.batch_size - 1) / cfg.batch_size);
  std::vector<std::size_t> order(n);
  int step = 0;
  bool have_best = false;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = learning_rate_at(cfg, epoch);
    set_lr(*opt, lr);
    if (head_opt) set_lr(*head_opt, lr);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(data::mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch), 0x5eed));
    std::shuffle(order.begin(), order.end(), rng);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    int seen = 0, correct = 0;
    double lambda = cfg.lambda;
    for (int s = 0; s < steps_per_epoch; ++s) {
      const std::size_t lo = static_cast<std::size_t>(s) * cfg.batch_size;
      const std::size_t hi = std::min(n, lo + cfg.batch_size);
      Batch b = make_batch(train_clips, std::span<const std::size_t>(order).subspan(lo, hi - lo), r.subjects,
                           r.gestures, cfg.seed, epoch);
      lambda = lambda_at(cfg, epoch, s, steps_per_epoch);
      StepLosses l;
      switch (cfg.objective) {
        case Objective::single_subject:
        case Objective::single_gesture: l = step_single(model, *opt, b, cfg.objective); break;
        case Objective::joint: l = step_joint(model, *opt, b); break;
        case Objective::adversarial:
          l = head_opt ? step_adversarial_literal(model, *opt, *head_opt, b, lambda)
                       : step_adversarial(model, *opt, b, lambda);
          break;
      }
      r.report.steps.push_back({step++, epoch, l.loss_g, l.loss_p, l.total, lr});
      rec.loss_g += l.loss_g * l.count;
      rec.loss_p += l.loss_p * l.count;
      rec.total += l.total * l.count;
      seen += l.count;
      correct += l.correct;
    }
    rec.loss_g /= seen;
    rec.loss_p /= seen;
    rec.total /= seen;
    rec.lambda = cfg.objective == Objective::adversarial ? lambda : 0.0;
    rec.train_accuracy = static_cast<double>(correct) / seen;

    if (!val_clips.empty()) {
      rec.val_accuracy = eval::accuracy(model, val_clips, primary, primary_labels);
      if (primary != eval::Head::subject && model.config().subject_head) {
        rec.val_subject_accuracy = eval::accuracy(model, val_clips, eval::Head::subject, r.subjects);
      }
    }
    if (rec.val_accuracy && (!have_best || *rec.val_accuracy > r.report.best_val_accuracy)) {
      copy_state(model, *r.best_model);
      r.report.best_epoch = epoch;
      r.report.best_val_accuracy = *rec.val_accuracy;
      have_best = true;
    }
    log::info("epoch %d/%d L_g=%.4f L_p=%.4f total=%.4f lr=%g train_acc=%.3f val_acc=%s", epoch + 1, cfg.epochs,
              rec.loss_g, rec.loss_p, rec.total, lr, rec.train_accuracy,
              rec.val_accuracy ? std::to_string(*rec.val_accuracy).c_str() : "n/a");
    r.report.epochs.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(rec);
  }
  if (!have_best) {
    copy_state(model, *r.best_model);
    r.report.best_epoch = cfg.epochs - 1;
  }
  r.final_model->eval();
  r.best_model->eval();
  return r;
}

net::CheckpointMeta checkpoint_meta(const TrainResult& r, std::string config_text, int epoch) {
  net::CheckpointMeta m;
  m.config_text = std::move(config_text);
  m.epoch = epoch;
  m.subject_labels = r.subjects.ids();
  m.gesture_labels = r.gestures.ids();
  return m;
}

// --- probe ---------------------------------------------------------------------

ProbeResult linear_probe(const Tensor& train_features, const std::vector<int>& train_labels,
                         const Tensor& test_features, const std::vector<int>& test_labels, const ProbeOptions& opts) {
  if (train_features.size(0) != static_cast<std::int64_t>(train_labels.size()) ||
      test_features.size(0) != static_cast<std::int64_t>(test_labels.size())) {
    throw Error(ErrorCode::invalid_argument, "linear_probe: feature/label count mismatch");
  }
  if (train_labels.empty()) throw Error(ErrorCode::invalid_argument, "linear_probe: no training samples");
  const data::LabelMap labels{std::vector<int>(train_labels)};
  const Tensor xtr = train_features.to(torch::kFloat64);
  const Tensor mean = xtr.mean(0, true);
  const Tensor sd = xtr.std(0, false, true) + 1e-6;
  const Tensor x = (xtr - mean) / sd;
  std::vector<std::int64_t> y;
  for (int id : train_labels) y.push_back(labels.index_of(id));
  const Tensor target = torch::tensor(y, torch::kLong);

  torch::NoGradGuard outer;  // features are frozen; re-enable grad only for the probe
  Tensor w = torch::zeros({x.size(1), labels.size()}, torch::kFloat64);
  Tensor bias = torch::zeros({labels.size()}, torch::kFloat64);
  {
    torch::AutoGradMode enable(true);
    w.requires_grad_(true);
    bias.requires_grad_(true);
    torch::optim::Adam opt({w, bias}, torch::optim::AdamOptions(opts.lr).weight_decay(opts.weight_decay));
    for (int e = 0; e < opts.epochs; ++e) {
      opt.zero_grad();
      Tensor loss = torch::nn::functional::cross_entropy(x.matmul(w) + bias, target);
      loss.backward();
      opt.step();
    }
  }
  auto acc = [&](const Tensor& feats, const std::vector<int>& ids) {
    if (ids.empty()) return 0.0;
    const Tensor z = (feats.to(torch::kFloat64) - mean) / sd;
    const Tensor pred = (z.matmul(w) + bias).argmax(1);
    int ok = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (labels.index_of(ids[i]) == pred[static_cast<std::int64_t>(i)].item<std::int64_t>()) ++ok;
    }
    return static_cast<double>(ok) / ids.size();
  };
  ProbeResult r;
  r.classes = labels.size();
  r.train_accuracy = acc(train_features, train_labels);
  r.test_accuracy = acc(test_features, test_labels);
  return r;
}

ProbeResult subject_probe(net::VideoResNetImpl& model, const std::vector<data::PreparedClip>& fit_clips,
                          const std::vector<data::PreparedClip>& test_clips, const ProbeOptions& opts) {
  auto embed = [&](const std::vector<data::PreparedClip>& clips, std::vector<int>& ids) {
    std::vector<Tensor> rows;
    for (const auto& c : clips) {
      rows.push_back(eval::embed_clip(model, data::test_view(c.clip)));
      ids.push_back(c.subject_id);
    }
    return rows.empty() ? torch::zeros({0, model.feature_dim()}) : torch::stack(rows);
  };
  std::vector<int> fit_ids, test_ids;
  const Tensor fit = embed(fit_clips, fit_ids);
  const Tensor test = embed(test_clips, test_ids);
  return linear_probe(fit, fit_ids, test, test_ids, opts);
}

void set_deterministic(bool on) {
  if (on) torch::set_num_threads(1);
  at::globalContext().setDeterministicAlgorithms(on, /*warn_only=*/false);
}

bool deterministic_from_env() {
  const char* v = std::getenv("EHI_DETERMINISTIC");
  return v && std::string_view(v) == "1";
}

}  // namespace ehi::train
