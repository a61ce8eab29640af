#include <algorithm>
#include <limits>

#include <boost/multiprecision/cpp_int.hpp>

#include "ehi/ablate.hpp"
#include "ehi/error.hpp"

namespace ehi::ablate {
namespace {

using boost::multiprecision::int256_t;

// Between-class variance up to the positive factor 1/N^2, as an exact
// fraction num/den: (S0*w1 - S1*w0)^2 / (w0*w1).
struct Fraction {
  int256_t num = 0;
  int256_t den = 1;
};

bool greater(const Fraction& a, const Fraction& b) { return a.num * b.den > b.num * a.den; }

MaskResult binarize_range(std::span<const std::uint16_t> depth, std::size_t begin, std::size_t end) {
  MaskResult out;
  out.mask.assign(end - begin, 0);
  std::uint16_t lo = std::numeric_limits<std::uint16_t>::max(), hi = 0;
  for (std::size_t i = begin; i < end; ++i) {
    const auto d = depth[i];
    if (d == 0) continue;
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  if (hi <= lo) {  // no valid pixels, or a single distinct value
    out.degenerate = true;
    return out;
  }
  const std::uint64_t range = hi - lo;
  auto bin_of = [&](std::uint16_t d) { return static_cast<int>((static_cast<std::uint64_t>(d - lo) * 255) / range); };
  std::array<std::uint64_t, 256> hist{};
  for (std::size_t i = begin; i < end; ++i) {
    if (depth[i] != 0) ++hist[bin_of(depth[i])];
  }
  const OtsuResult otsu = otsu_threshold(hist);
  out.threshold = otsu.threshold;
  for (std::size_t i = begin; i < end; ++i) {
    const auto d = depth[i];
    out.mask[i - begin] = (d != 0 && bin_of(d) <= otsu.threshold) ? 1 : 0;
  }
  return out;
}

}  // namespace

OtsuResult otsu_threshold(std::span<const std::uint64_t, 256> hist) {
  std::uint64_t total = 0, total_sum = 0;
  int occupied = 0, last_bin = 0;
  for (int i = 0; i < 256; ++i) {
    total += hist[i];
    total_sum += hist[i] * static_cast<std::uint64_t>(i);
    if (hist[i] > 0) {
      ++occupied;
      last_bin = i;
    }
  }
  if (total == 0) throw Error(ErrorCode::invalid_argument, "otsu_threshold: empty histogram");
  if (occupied == 1) return {last_bin, true};

  Fraction best{0, 1};
  int best_t = 0;
  std::uint64_t w0 = 0, s0 = 0;
  for (int t = 0; t < 256; ++t) {
    w0 += hist[t];
    s0 += hist[t] * static_cast<std::uint64_t>(t);
    const std::uint64_t w1 = total - w0, s1 = total_sum - s0;
    if (w0 == 0 || w1 == 0) continue;  // one class empty: zero variance
    const int256_t diff = int256_t(s0) * int256_t(w1) - int256_t(s1) * int256_t(w0);
    Fraction f{diff * diff, int256_t(w0) * int256_t(w1)};
    if (greater(f, best)) {
      best = f;
      best_t = t;
    }
  }
  return {best_t, false};
}

MaskResult binarize_depth(std::span<const std::uint16_t> depth_frame) {
  return binarize_range(depth_frame, 0, depth_frame.size());
}

MaskResult binarize_depth_clip(std::span<const std::uint16_t> depth) {
  return binarize_range(depth, 0, depth.size());
}

}  // namespace ehi::ablate
