#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "ehi/color.hpp"
#include "ehi/error.hpp"
#include "ehi/synthgen.hpp"

namespace ehi::synth {
namespace {

constexpr double kPi = std::numbers::pi;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash4(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) {
  return splitmix(splitmix(splitmix(splitmix(a) ^ b) ^ c) ^ d);
}

// Symmetric integer noise in [-amp, amp] keyed by position, independent of
// evaluation order.
int pixel_noise(std::uint64_t seed, int t, int y, int x, int amp, std::uint64_t channel) {
  if (amp <= 0) return 0;
  const std::uint64_t h = hash4(seed ^ (channel * 0x51ed27ULL), static_cast<std::uint64_t>(t),
                                static_cast<std::uint64_t>(y), static_cast<std::uint64_t>(x));
  return static_cast<int>(h % static_cast<std::uint64_t>(2 * amp + 1)) - amp;
}

double triangle(double u) {
  double m = std::fmod(u, 2.0);
  if (m < 0) m += 2.0;
  return m <= 1.0 ? -1.0 + 2.0 * m : 3.0 - 2.0 * m;
}

std::uint8_t clamp8(int v) { return static_cast<std::uint8_t>(std::clamp(v, 0, 255)); }

struct Capsule {
  double ax, ay, bx, by, radius;
};

double segment_distance(double px, double py, const Capsule& c) {
  const double dx = c.bx - c.ax, dy = c.by - c.ay;
  const double len2 = dx * dx + dy * dy;
  double s = len2 > 0 ? ((px - c.ax) * dx + (py - c.ay) * dy) / len2 : 0.0;
  s = std::clamp(s, 0.0, 1.0);
  const double qx = c.ax + s * dx - px, qy = c.ay + s * dy - py;
  return std::sqrt(qx * qx + qy * qy);
}

// Hand model in local coordinates (origin at palm centre, y pointing down).
struct HandShape {
  double a = 1, b = 1;  // palm semi-axes
  double exponent = 2.6;
  std::array<Capsule, 5> digits{};
  double reach = 1;  // bounding radius

  HandShape(const SubjectSignature& sig, double frame_height, double spread) {
    const double base = 0.13 * frame_height * sig.shape_scale;
    a = base * std::sqrt(sig.aspect);
    b = base / std::sqrt(sig.aspect);
    const std::array<double, 4> xs = {-0.55, -0.18, 0.18, 0.55};
    const std::array<double, 4> lens = {0.85, 1.05, 1.0, 0.75};
    const double width = std::max(1.2, 0.2 * a);
    const double finger_base = 1.1 * b;
    for (int i = 0; i < 4; ++i) {
      const double ang = (i - 1.5) * 0.22 * (0.4 + spread);
      const double bx = xs[i] * a, by = -0.75 * b;
      const double len = lens[i] * finger_base;
      digits[i] = {bx, by, bx + len * std::sin(ang), by - len * std::cos(ang), width / 2 + 0.5};
    }
    const double thumb_ang = -1.0 - 0.5 * spread;
    const double tbx = -0.85 * a, tby = -0.1 * b, tlen = 0.8 * finger_base;
    digits[4] = {tbx, tby, tbx + tlen * std::sin(thumb_ang), tby - tlen * std::cos(thumb_ang),
                 0.6 * width + 0.5};
    reach = std::max(a, b);
    for (const auto& d : digits) {
      reach = std::max({reach, std::hypot(d.bx, d.by) + d.radius, std::hypot(d.ax, d.ay) + d.radius});
    }
    reach += 1.0;
  }

  bool contains(double lx, double ly) const {
    if (std::pow(std::abs(lx / a), exponent) + std::pow(std::abs(ly / b), exponent) <= 1.0) return true;
    for (const auto& d : digits) {
      if (segment_distance(lx, ly, d) <= d.radius) return true;
    }
    return false;
  }
};

struct Rect {
  int x0, y0, x1, y1;
  bool contains(int x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
};

constexpr std::array<std::array<int, 3>, 8> kObjectPalette = {{
    {220, 40, 40}, {40, 170, 60}, {40, 70, 220}, {230, 200, 30},
    {200, 50, 200}, {30, 200, 210}, {240, 130, 20}, {120, 60, 30},
}};

struct Background {
  std::vector<std::uint8_t> rgb;     // H*W*3
  std::vector<std::uint16_t> depth;  // H*W
};

Background render_background(const PlaceStyle& style, int H, int W, std::uint64_t seed, int t) {
  Background bg;
  bg.rgb.resize(static_cast<std::size_t>(H) * W * 3);
  bg.depth.resize(static_cast<std::size_t>(H) * W);

  std::mt19937_64 rng(splitmix(seed ^ 0xb4c7ULL));
  std::uniform_int_distribution<int> ux(0, W - 1), uy(0, H - 1), usz(W / 8, W / 4);
  std::array<Rect, 3> props{};
  std::array<std::array<int, 3>, 3> prop_colors{};
  for (int i = 0; i < 3; ++i) {
    const int x = ux(rng), y = uy(rng), w = usz(rng), h = usz(rng);
    props[i] = {x, y, std::min(W, x + w), std::min(H, y + h)};
    std::uniform_int_distribution<int> uc(40, 200);
    prop_colors[i] = {uc(rng), uc(rng), uc(rng)};
  }
  const Rect object{6, 6, 6 + static_cast<int>(0.30 * W), 6 + static_cast<int>(0.35 * H)};
  std::array<int, 3> object_color{};
  const bool has_object = style.mode == BackgroundMode::confounded;
  if (has_object) {
    const std::size_t idx = style.place == corpus::Place::indoor
                                ? static_cast<std::size_t>(style.subject_index) % kObjectPalette.size()
                                : static_cast<std::size_t>(rng() % kObjectPalette.size());
    object_color = kObjectPalette[idx];
  }

  const bool indoor = style.place == corpus::Place::indoor;
  for (int y = 0; y < H; ++y) {
    const double fy = static_cast<double>(y) / H;
    for (int x = 0; x < W; ++x) {
      const double fx = static_cast<double>(x) / W;
      int r, g, b;
      double d;
      if (indoor) {
        if (fy > 0.78) {  // table top
          r = 125; g = 92; b = 62;
          d = 1600.0 + 500.0 * (1.0 - fy);
        } else {
          r = static_cast<int>(205 - 30 * fy); g = static_cast<int>(188 - 25 * fy); b = static_cast<int>(160 - 20 * fy);
          d = 2000.0 + 160.0 * (fx - 0.5);
        }
      } else {
        if (fy < 0.4) {
          r = static_cast<int>(135 + 60 * fy); g = static_cast<int>(180 + 50 * fy); b = 235;
          d = 3000.0;
        } else {
          r = 88; g = static_cast<int>(122 - 20 * fy); b = 70;
          d = 2300.0 + 400.0 * (1.0 - fy);
        }
      }
      for (int i = 0; i < 3; ++i) {
        if (props[i].contains(x, y)) {
          r = prop_colors[i][0]; g = prop_colors[i][1]; b = prop_colors[i][2];
          d = indoor ? 1750.0 : 1900.0;
        }
      }
      if (has_object && object.contains(x, y)) {
        const bool stripe = ((y - object.y0) / 4) % 2 == 0;
        r = stripe ? object_color[0] : object_color[0] / 2;
        g = stripe ? object_color[1] : object_color[1] / 2;
        b = stripe ? object_color[2] : object_color[2] / 2;
        d = 1650.0;
      }
      const int amp = indoor ? 4 : 6;
      const std::size_t i3 = (static_cast<std::size_t>(y) * W + x) * 3;
      bg.rgb[i3 + 0] = clamp8(r + pixel_noise(seed, t, y, x, amp, 11));
      bg.rgb[i3 + 1] = clamp8(g + pixel_noise(seed, t, y, x, amp, 12));
      bg.rgb[i3 + 2] = clamp8(b + pixel_noise(seed, t, y, x, amp, 13));
      bg.depth[static_cast<std::size_t>(y) * W + x] =
          static_cast<std::uint16_t>(std::lround(d) + pixel_noise(seed, t, y, x, 5, 14));
    }
  }
  return bg;
}

}  // namespace

Rgb8 constant_luma_color(int luma, double hue_deg, double chroma) {
  const double h = hue_deg * kPi / 180.0;
  const double u = chroma * std::cos(h);  // B - Y
  const double v = chroma * std::sin(h);  // R - Y
  const double ideal[3] = {luma + v, luma - (0.299 * v + 0.114 * u) / 0.587, luma + u};
  const int base[3] = {static_cast<int>(std::lround(ideal[0])), static_cast<int>(std::lround(ideal[1])),
                       static_cast<int>(std::lround(ideal[2]))};
  Rgb8 best{0, 0, 0};
  double best_err = 1e300;
  for (int dr = -2; dr <= 2; ++dr) {
    for (int dg = -2; dg <= 2; ++dg) {
      for (int db = -2; db <= 2; ++db) {
        const int r = base[0] + dr, g = base[1] + dg, b = base[2] + db;
        if (r < 0 || r > 255 || g < 0 || g > 255 || b < 0 || b > 255) continue;
        if (luma_bt601(r, g, b) != luma) continue;
        const double err = (r - ideal[0]) * (r - ideal[0]) + (g - ideal[1]) * (g - ideal[1]) +
                           (b - ideal[2]) * (b - ideal[2]);
        if (err < best_err) {
          best_err = err;
          best = {static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)};
        }
      }
    }
  }
  if (best_err == 1e300) {
    const auto l = static_cast<std::uint8_t>(std::clamp(luma, 0, 255));
    return {l, l, l};  // gray always has exact luma
  }
  return best;
}

FrameGeometry frame_geometry(const SubjectSignature& sig, const GestureScript& script,
                             int frame_height, int frame_width, int t) {
  const double u = sig.tempo * t / std::max(1, script.base_length);
  const double amp = script.amplitude * frame_height;
  const double dir = script.direction_deg * kPi / 180.0;
  const double dx = std::cos(dir), dy = std::sin(dir);
  double ox = 0, oy = 0;
  switch (script.path) {
    case PathFamily::linear: {
      const double s = amp * triangle(u);
      ox = dx * s;
      oy = dy * s;
      break;
    }
    case PathFamily::circle:
      ox = amp * std::cos(2 * kPi * u + dir);
      oy = amp * std::sin(2 * kPi * u + dir);
      break;
    case PathFamily::zigzag: {
      const double s = amp * triangle(u);
      const double w = 0.35 * amp * std::sin(6 * kPi * u);
      ox = dx * s - dy * w;
      oy = dy * s + dx * w;
      break;
    }
    case PathFamily::figure8: {
      const double lx = amp * std::sin(2 * kPi * u), ly = 0.5 * amp * std::sin(4 * kPi * u);
      ox = dx * lx - dy * ly;
      oy = dy * lx + dx * ly;
      break;
    }
  }
  FrameGeometry g;
  g.center_x = 0.5 * frame_width + ox;
  g.center_y = 0.58 * frame_height + oy;
  switch (script.pose) {
    case PoseSchedule::steady: break;
    case PoseSchedule::open_close: g.spread = 0.5 + 0.5 * std::sin(2 * kPi * u); break;
    case PoseSchedule::rotate: g.rotation = 0.5 * std::sin(2 * kPi * u); break;
    case PoseSchedule::wave:
      g.rotation = 0.3 * std::sin(4 * kPi * u);
      g.spread = 0.5 + 0.5 * std::cos(2 * kPi * u);
      break;
  }
  return g;
}

RenderedClip render_clip(const SubjectSignature& sig, const GestureScript& script,
                         const PlaceStyle& style, int length, std::uint64_t seed,
                         const SynthConfig& cfg) {
  if (length < 1) throw Error(ErrorCode::invalid_argument, "render_clip: length must be >= 1");
  const int H = cfg.frame_height, W = cfg.frame_width;
  const std::size_t hw = static_cast<std::size_t>(H) * W;

  std::mt19937_64 rng(splitmix(seed ^ 0x7a11ULL));
  std::uniform_real_distribution<double> jitter(-6.0, 6.0);
  const double jx = jitter(rng), jy = jitter(rng);

  std::array<Rgb8, 256> palette{};
  for (int l = 0; l < 256; ++l) palette[l] = constant_luma_color(l, sig.hue_deg, cfg.chroma);

  RenderedClip out;
  auto& clip = out.clip;
  clip.frames = length;
  clip.height = H;
  clip.width = W;
  clip.rgb.resize(hw * 3 * length);
  clip.depth.resize(hw * length);
  out.silhouette.assign(hw * length, 0);

  const double two_pi_f = 2 * kPi * sig.texture_freq;
  for (int t = 0; t < length; ++t) {
    Background bg = render_background(style, H, W, seed, t);
    std::copy(bg.rgb.begin(), bg.rgb.end(), clip.rgb.begin() + static_cast<std::ptrdiff_t>(hw * 3 * t));
    std::copy(bg.depth.begin(), bg.depth.end(), clip.depth.begin() + static_cast<std::ptrdiff_t>(hw * t));

    const FrameGeometry geo = frame_geometry(sig, script, H, W, t);
    const HandShape hand(sig, H, geo.spread);
    const double cx = geo.center_x + jx, cy = geo.center_y + jy;
    const double cr = std::cos(geo.rotation), sr = std::sin(geo.rotation);
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - hand.reach)));
    const int x1 = std::min(W - 1, static_cast<int>(std::ceil(cx + hand.reach)));
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - hand.reach)));
    const int y1 = std::min(H - 1, static_cast<int>(std::ceil(cy + hand.reach)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double px = x - cx, py = y - cy;
        const double lx = cr * px + sr * py;
        const double ly = -sr * px + cr * py;
        if (!hand.contains(lx, ly)) continue;
        const std::size_t idx = hw * t + static_cast<std::size_t>(y) * W + x;
        out.silhouette[idx] = 1;
        const double tex = std::sin(two_pi_f * lx + sig.texture_phase) *
                           std::sin(0.8 * two_pi_f * ly + 1.7 * sig.texture_phase);
        const int luma = std::clamp(static_cast<int>(std::lround(cfg.gray_level + cfg.texture_amplitude * tex)) +
                                        pixel_noise(seed, t, y, x, 3, 21),
                                    0, 255);
        const Rgb8 c = palette[luma];
        clip.rgb[idx * 3 + 0] = c.r;
        clip.rgb[idx * 3 + 1] = c.g;
        clip.rgb[idx * 3 + 2] = c.b;
        const double r2 = std::min(1.0, (lx / hand.a) * (lx / hand.a) + (ly / hand.b) * (ly / hand.b));
        const long d = std::lround(sig.depth_offset_mm + sig.depth_curvature * r2) + pixel_noise(seed, t, y, x, 2, 22);
        clip.depth[idx] = static_cast<std::uint16_t>(std::max(1L, d));
      }
    }
  }
  return out;
}

}  // namespace ehi::synth
