#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "ehi/error.hpp"
#include "ehi/evalkit.hpp"

namespace ehi::eval {

namespace fs = std::filesystem;
using nlohmann::json;

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::io, "short write to " + path.string());
}

namespace {

std::string num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

json group_json(const std::vector<GroupAccuracy>& groups) {
  json arr = json::array();
  for (const auto& g : groups) {
    arr.push_back({{"key", g.key}, {"correct", g.correct}, {"total", g.total}, {"accuracy", g.accuracy()}});
  }
  return arr;
}

std::string group_csv(const std::vector<GroupAccuracy>& groups, const std::string& key_name) {
  std::string out = key_name + ",correct,total,accuracy\n";
  for (const auto& g : groups) {
    out += g.key + "," + std::to_string(g.correct) + "," + std::to_string(g.total) + "," + num(g.accuracy()) + "\n";
  }
  return out;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

constexpr int kW = 560, kH = 400, kLeft = 64, kRight = 20, kTop = 40, kBottom = 56;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

struct Frame {
  double x0, x1, y0, y1;
  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kW - kLeft - kRight); }
  double py(double y) const { return kH - kBottom - (y - y0) / (y1 - y0) * (kH - kTop - kBottom); }
};

void axes(std::ostringstream& s, const Frame& f, const std::string& title, const std::string& xlabel,
          const std::string& ylabel, bool x_ticks = true) {
  s << "<text x=\"" << kW / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << escape(title) << "</text>\n";
  s << "<line x1=\"" << kLeft << "\" y1=\"" << kH - kBottom << "\" x2=\"" << kW - kRight << "\" y2=\"" << kH - kBottom
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kH - kBottom
    << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double y = f.y0 + (f.y1 - f.y0) * i / 4.0;
    s << "<text x=\"" << kLeft - 6 << "\" y=\"" << num(f.py(y) + 4) << "\" text-anchor=\"end\" font-size=\"11\">"
      << num(y) << "</text>\n";
    if (x_ticks) {
      const double x = f.x0 + (f.x1 - f.x0) * i / 4.0;
      s << "<text x=\"" << num(f.px(x)) << "\" y=\"" << kH - kBottom + 16
        << "\" text-anchor=\"middle\" font-size=\"11\">" << num(x) << "</text>\n";
    }
  }
  s << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 12 << "\" text-anchor=\"middle\" font-size=\"12\">" << escape(xlabel)
    << "</text>\n";
  s << "<text x=\"16\" y=\"" << kH / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
    << kH / 2 << ")\">" << escape(ylabel) << "</text>\n";
}

std::string open_svg(int w = kW, int h = kH) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) + "\" height=\"" +
         std::to_string(h) + "\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

}  // namespace

std::string svg_line_plot(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                          const std::vector<Series>& series) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (double v : s.x) x0 = std::min(x0, v), x1 = std::max(x1, v);
    for (double v : s.y) y0 = std::min(y0, v), y1 = std::max(y1, v);
  }
  if (!(x1 > x0)) x0 = std::isfinite(x0) ? x0 - 1 : 0, x1 = x0 + 2;
  if (!(y1 > y0)) y0 = std::isfinite(y0) ? y0 - 1 : 0, y1 = y0 + 2;
  const Frame f{x0, x1, y0, y1};
  std::ostringstream s;
  s << open_svg();
  axes(s, f, title, xlabel, ylabel);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& ser = series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < std::min(ser.x.size(), ser.y.size()); ++i) {
      if (!std::isfinite(ser.x[i]) || !std::isfinite(ser.y[i])) continue;
      s << num(f.px(ser.x[i])) << "," << num(f.py(ser.y[i])) << " ";
    }
    s << "\"/>\n";
    s << "<text x=\"" << kW - kRight - 4 << "\" y=\"" << kTop + 14 + 16 * k << "\" text-anchor=\"end\" font-size=\"12\" fill=\""
      << color << "\">" << escape(ser.label) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::string svg_bar_chart(const std::string& title, const std::vector<std::string>& labels,
                          const std::vector<double>& values, const std::string& ylabel) {
  double hi = 0.0;
  for (double v : values) hi = std::max(hi, v);
  if (hi <= 0.0) hi = 1.0;
  const Frame f{0.0, static_cast<double>(std::max<std::size_t>(values.size(), 1)), 0.0, hi};
  std::ostringstream s;
  s << open_svg();
  axes(s, f, title, "", ylabel, false);
  const double slot = (kW - kLeft - kRight) / f.x1;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double x = f.px(static_cast<double>(i)) + slot * 0.1, top = f.py(values[i]);
    s << "<rect x=\"" << num(x) << "\" y=\"" << num(top) << "\" width=\"" << num(slot * 0.8) << "\" height=\""
      << num(kH - kBottom - top) << "\" fill=\"" << kPalette[0] << "\"/>\n";
    if (i < labels.size()) {
      s << "<text x=\"" << num(x + slot * 0.4) << "\" y=\"" << kH - kBottom + 16
        << "\" text-anchor=\"middle\" font-size=\"10\">" << escape(labels[i]) << "</text>\n";
    }
  }
  s << "</svg>\n";
  return s.str();
}

std::string svg_histogram(const std::string& title, const std::vector<int>& values, int bins, const std::string& xlabel) {
  if (values.empty() || bins < 1) return svg_bar_chart(title, {}, {}, "count");
  const int lo = *std::min_element(values.begin(), values.end());
  const int hi = *std::max_element(values.begin(), values.end());
  const int width = std::max(1, (hi - lo + bins) / bins);
  std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
  for (int v : values) counts[std::min(bins - 1, (v - lo) / width)] += 1.0;
  std::vector<std::string> labels;
  for (int b = 0; b < bins; ++b) labels.push_back(std::to_string(lo + b * width));
  return svg_bar_chart(title + " (" + xlabel + ")", labels, counts, "count");
}

std::string svg_heatmap(const std::string& title, const torch::Tensor& map) {
  const torch::Tensor m = map.to(torch::kFloat64).contiguous();
  const int h = static_cast<int>(m.size(0)), w = static_cast<int>(m.size(1));
  const int step = std::max(1, (std::max(h, w) + 55) / 56);
  const double lo = m.min().item<double>(), hi = m.max().item<double>();
  auto acc = m.accessor<double, 2>();
  const int cell = 4;
  std::ostringstream s;
  s << open_svg(w / step * cell + 20, h / step * cell + 50);
  s << "<text x=\"10\" y=\"24\" font-size=\"14\">" << escape(title) << "</text>\n";
  for (int i = 0; i + step <= h; i += step) {
    for (int j = 0; j + step <= w; j += step) {
      const double v = hi > lo ? (acc[i][j] - lo) / (hi - lo) : 0.0;
      const int g = static_cast<int>(std::lround(255 * v));
      s << "<rect x=\"" << 10 + j / step * cell << "\" y=\"" << 40 + i / step * cell << "\" width=\"" << cell
        << "\" height=\"" << cell << "\" fill=\"rgb(" << g << ",0," << 255 - g << ")\"/>\n";
    }
  }
  s << "</svg>\n";
  return s.str();
}

json to_json(const EvalReport& r) {
  json j;
  j["head"] = r.head;
  j["accuracy"] = r.overall.accuracy();
  j["correct"] = r.overall.correct;
  j["total"] = r.overall.total;
  j["per_gesture"] = group_json(r.per_gesture);
  j["per_stratum"] = group_json(r.per_stratum);
  j["quantiles"] = {{"q25", r.q25}, {"q75", r.q75}};
  j["seen_unseen"] = group_json(r.seen_unseen);
  j["confusion"] = {{"labels", r.labels}, {"counts", r.confusion}};
  j["length_summary"] = {{"mean", r.mean_length}, {"median", r.median_length}};
  return j;
}

json to_json(const VerificationReport& r) {
  json j;
  j["pairs"] = r.pairs.size();
  j["eer"] = r.eer.eer;
  j["eer_threshold"] = r.eer.threshold;
  json roc = json::array();
  for (const auto& p : r.roc) {
    roc.push_back({{"threshold", std::isinf(p.threshold) ? json(nullptr) : json(p.threshold)},
                   {"fpr", p.fpr},
                   {"tpr", p.tpr},
                   {"fnr", p.fnr}});
  }
  j["roc"] = roc;
  return j;
}

std::vector<fs::path> write_eval_report(const fs::path& dir, const EvalReport& r) {
  std::vector<fs::path> files;
  auto put = [&](const std::string& name, const std::string& text) {
    write_text(dir / name, text);
    files.push_back(dir / name);
  };
  put("report.json", to_json(r).dump(2) + "\n");
  put("per_gesture.csv", group_csv(r.per_gesture, "gesture"));
  put("per_stratum.csv", group_csv(r.per_stratum, "stratum"));
  if (!r.seen_unseen.empty()) put("seen_unseen.csv", group_csv(r.seen_unseen, "group"));

  std::string conf = "true\\predicted";
  for (int l : r.labels) conf += "," + std::to_string(l);
  conf += "\n";
  for (std::size_t i = 0; i < r.labels.size(); ++i) {
    conf += std::to_string(r.labels[i]);
    for (int c : r.confusion[i]) conf += "," + std::to_string(c);
    conf += "\n";
  }
  put("confusion.csv", conf);

  std::string pred = "clip_id,true,predicted,gesture_id,num_frames\n";
  std::vector<int> lengths;
  for (const auto& p : r.predictions) {
    pred += p.clip_id + "," + std::to_string(p.true_label) + "," + std::to_string(p.predicted_label) + "," +
            std::to_string(p.gesture_id) + "," + std::to_string(p.num_frames) + "\n";
    lengths.push_back(p.num_frames);
  }
  put("predictions.csv", pred);
  put("length_histogram.svg", svg_histogram("Clip length", lengths, 12, "frames"));
  std::vector<std::string> labels;
  std::vector<double> acc;
  for (const auto& g : r.per_gesture) {
    labels.push_back(g.key);
    acc.push_back(100.0 * g.accuracy());
  }
  put("per_gesture.svg", svg_bar_chart("Accuracy per gesture", labels, acc, "accuracy (%)"));
  return files;
}

std::vector<fs::path> write_verification_report(const fs::path& dir, const VerificationReport& r) {
  std::vector<fs::path> files;
  auto put = [&](const std::string& name, const std::string& text) {
    write_text(dir / name, text);
    files.push_back(dir / name);
  };
  put("verification.json", to_json(r).dump(2) + "\n");
  std::string pairs = "clip_a,clip_b,label,score\n";
  for (const auto& p : r.pairs) {
    pairs += p.pair.clip_a + "," + p.pair.clip_b + "," + (p.pair.label == corpus::PairLabel::same ? "same" : "different") +
             "," + num(p.score) + "\n";
  }
  put("pairs.csv", pairs);
  std::string roc = "threshold,fpr,tpr,fnr\n";
  Series tpr{"ROC", {}, {}}, fpr_s{"FPR", {}, {}}, fnr_s{"FNR", {}, {}};
  for (const auto& p : r.roc) {
    roc += num(p.threshold) + "," + num(p.fpr) + "," + num(p.tpr) + "," + num(p.fnr) + "\n";
    tpr.x.push_back(p.fpr);
    tpr.y.push_back(p.tpr);
    if (std::isfinite(p.threshold)) {
      fpr_s.x.push_back(p.threshold);
      fpr_s.y.push_back(p.fpr);
      fnr_s.x.push_back(p.threshold);
      fnr_s.y.push_back(p.fnr);
    }
  }
  put("roc.csv", roc);
  put("roc.svg", svg_line_plot("ROC (EER " + num(100.0 * r.eer.eer) + "%)", "false positive rate",
                               "true positive rate", {tpr}));
  put("tradeoff.svg", svg_line_plot("FPR / FNR trade-off", "cosine threshold", "rate", {fpr_s, fnr_s}));
  return files;
}

std::vector<fs::path> write_cam_report(const fs::path& dir, const CamSummary& cam, const torch::Tensor& mean_mask) {
  std::vector<fs::path> files;
  auto put = [&](const std::string& name, const std::string& text) {
    write_text(dir / name, text);
    files.push_back(dir / name);
  };
  auto csv = [](const torch::Tensor& t) {
    const torch::Tensor m = t.to(torch::kFloat64).contiguous();
    auto a = m.accessor<double, 2>();
    std::string out;
    for (int i = 0; i < m.size(0); ++i) {
      for (int j = 0; j < m.size(1); ++j) out += (j ? "," : "") + num(a[i][j]);
      out += "\n";
    }
    return out;
  };
  json j = {{"clips", cam.clips}, {"peak", {{"row", cam.peak_row}, {"col", cam.peak_col}}}};
  if (mean_mask.defined()) {
    const PeakLocation mp = peak_of(mean_mask);
    j["mask_peak"] = {{"row", mp.row}, {"col", mp.col}};
    j["peak_distance"] = peak_distance(cam.mean_cam, mean_mask);
    put("mean_mask.csv", csv(mean_mask));
  }
  put("cam.json", j.dump(2) + "\n");
  put("mean_cam.csv", csv(cam.mean_cam));
  put("cam.svg", svg_heatmap("Average CAM", cam.mean_cam));
  return files;
}

}  // namespace ehi::eval
