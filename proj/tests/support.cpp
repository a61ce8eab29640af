#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

#include "ehi/synthgen.hpp"

namespace ehi::testing {

TempDir::TempDir() {
  std::string tmpl = (fs::temp_directory_path() / "ehi-test-XXXXXX").string();
  if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
  path_ = tmpl;
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

corpus::Manifest make_corpus(const fs::path& dir, std::string_view preset, int subjects, int gestures, int repeats,
                             std::uint64_t seed) {
  auto cfg = synth::make_preset(preset, {subjects, gestures, repeats, seed});
  return synth::generate_corpus(cfg, dir);
}

corpus::ClipRecord record(std::string id, int subject, int gesture, corpus::Place place, int frames) {
  corpus::ClipRecord r;
  r.clip_id = std::move(id);
  r.subject_id = subject;
  r.gesture_id = gesture;
  r.place = place;
  r.num_frames = frames;
  r.path = "clips/" + r.clip_id;
  return r;
}

using u128 = unsigned __int128;

// Between-class variance for split {<= t} / {> t} is proportional to
// (N1*S0 - N0*S1)^2 / (N0*N1); compared exactly by cross-multiplication.
int brute_force_otsu(const Hist& h) {
  int nonzero = 0, last = 0;
  for (int i = 0; i < 256; ++i) {
    if (h[i]) ++nonzero, last = i;
  }
  if (nonzero == 1) return last;
  int best = 0;
  u128 best_num = 0, best_den = 1;
  for (int t = 0; t < 256; ++t) {
    u128 n0 = 0, s0 = 0, n1 = 0, s1 = 0;
    for (int i = 0; i < 256; ++i) {
      (i <= t ? n0 : n1) += h[i];
      (i <= t ? s0 : s1) += static_cast<u128>(h[i]) * i;
    }
    u128 num = 0, den = 1;
    if (n0 && n1) {
      const u128 a = n1 * s0, b = n0 * s1;
      const u128 diff = a > b ? a - b : b - a;
      num = diff * diff;
      den = n0 * n1;
    }
    // num/den > best_num/best_den; the squared term can reach 2^90 so divide
    // first and compare remainders when the quotients tie.
    const u128 q = num / den, bq = best_num / best_den;
    bool better = q > bq;
    if (q == bq) better = (num % den) * best_den > (best_num % best_den) * den;
    if (better) best = t, best_num = num, best_den = den;
  }
  return best;
}

Hist random_hist(std::mt19937_64& rng) {
  Hist h{};
  std::uniform_int_distribution<int> kind(0, 3), count(0, 1000), bin(0, 255);
  switch (kind(rng)) {
    case 0:  // dense
      for (auto& c : h) c = count(rng);
      break;
    case 1:  // sparse
      for (int k = 0, n = 2 + count(rng) % 6; k < n; ++k) h[bin(rng)] += 1 + count(rng);
      break;
    case 2: {  // symmetric pair, exact ties
      const int a = bin(rng) % 128, c = 1 + count(rng);
      h[a] = c;
      h[255 - a] = c;
      break;
    }
    default:  // two bumps
      for (int k = 0; k < 2; ++k) {
        const int centre = bin(rng);
        for (int d = -10; d <= 10; ++d) {
          const int i = std::clamp(centre + d, 0, 255);
          h[i] += static_cast<std::uint64_t>(100 * std::exp(-d * d / 20.0));
        }
      }
  }
  if (std::all_of(h.begin(), h.end(), [](auto c) { return c == 0; })) h[bin(rng)] = 1;
  return h;
}

double brute_force_eer(const std::vector<double>& pos, const std::vector<double>& neg) {
  std::vector<double> all = pos;
  all.insert(all.end(), neg.begin(), neg.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  std::vector<double> thresholds{all.back() + 1.0};
  for (std::size_t i = all.size() - 1; i > 0; --i) thresholds.push_back(0.5 * (all[i] + all[i - 1]));
  thresholds.push_back(all.front() - 1.0);
  auto rates = [&](double t) {
    double fp = 0, fn = 0;
    for (double s : neg) fp += s > t;
    for (double s : pos) fn += s <= t;
    return std::pair{fp / neg.size(), fn / pos.size()};
  };
  auto [fpr0, fnr0] = rates(thresholds[0]);
  for (std::size_t i = 1; i < thresholds.size(); ++i) {
    const auto [fpr, fnr] = rates(thresholds[i]);
    const double da = fnr0 - fpr0, db = fnr - fpr;
    if (db <= 0) {
      if (db == 0) return fpr;
      const double a = da / (da - db);
      return fpr0 + a * (fpr - fpr0);
    }
    fpr0 = fpr;
    fnr0 = fnr;
  }
  return 1.0;
}

}  // namespace ehi::testing
