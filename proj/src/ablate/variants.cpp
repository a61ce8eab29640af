#include <algorithm>

#include "ehi/ablate.hpp"
#include "ehi/color.hpp"
#include "ehi/error.hpp"

namespace ehi::ablate {

int channels(InputVariant v) noexcept {
  switch (v) {
    case InputVariant::rgb: return 3;
    case InputVariant::depth: return 1;
    case InputVariant::binary_hand: return 1;
    case InputVariant::hand_3d: return 1;
    case InputVariant::gray_hand: return 1;
    case InputVariant::color_hand: return 3;
    case InputVariant::color_hand_3d: return 4;
  }
  return 0;
}

bool needs_depth(InputVariant v) noexcept { return v != InputVariant::rgb; }

bool needs_rgb(InputVariant v) noexcept {
  return v == InputVariant::rgb || v == InputVariant::gray_hand || v == InputVariant::color_hand ||
         v == InputVariant::color_hand_3d;
}

std::string_view to_string(InputVariant v) noexcept {
  switch (v) {
    case InputVariant::rgb: return "rgb";
    case InputVariant::depth: return "depth";
    case InputVariant::binary_hand: return "binary-hand";
    case InputVariant::hand_3d: return "3d-hand";
    case InputVariant::gray_hand: return "gray-hand";
    case InputVariant::color_hand: return "color-hand";
    case InputVariant::color_hand_3d: return "3d-color-hand";
  }
  return "rgb";
}

InputVariant parse_variant(std::string_view name) {
  for (auto v : kAllVariants) {
    if (to_string(v) == name) return v;
  }
  throw Error(ErrorCode::config, "unknown input variant '" + std::string(name) + "'");
}

ClipTensor::ClipTensor(int t, int h, int w, int c, float fill)
    : frames(t), height(h), width(w), channels(c),
      data(static_cast<std::size_t>(t) * h * w * c, fill) {}

std::uint8_t to_gray(std::uint8_t r, std::uint8_t g, std::uint8_t b) noexcept {
  return luma_bt601(r, g, b);
}

std::vector<std::uint8_t> to_gray(std::span<const std::uint8_t> rgb) {
  std::vector<std::uint8_t> out(rgb.size() / 3);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = luma_bt601(rgb[3 * i], rgb[3 * i + 1], rgb[3 * i + 2]);
  return out;
}

float DepthNormalization::operator()(std::uint16_t depth_mm) const noexcept {
  if (depth_mm == 0) return 0.0f;
  const double d = std::clamp(static_cast<double>(depth_mm), near_mm, far_mm - 1.0);
  return static_cast<float>((far_mm - d) / (far_mm - near_mm));
}

MaskResult hand_masks(const corpus::RawClip& raw, OtsuScope scope) {
  if (!raw.has_depth()) throw Error(ErrorCode::modality_missing, "hand masks need depth frames");
  if (scope == OtsuScope::per_clip) return binarize_depth_clip(raw.depth);
  MaskResult out;
  out.mask.reserve(raw.depth.size());
  int degenerate = 0;
  for (int t = 0; t < raw.frames; ++t) {
    MaskResult m = binarize_depth(raw.depth_frame(t));
    if (m.degenerate) ++degenerate;
    out.mask.insert(out.mask.end(), m.mask.begin(), m.mask.end());
    out.threshold = m.threshold;
  }
  out.degenerate = degenerate > 0;
  return out;
}

VariantOutput apply_variant(const corpus::RawClip& raw, InputVariant v, const VariantOptions& opts) {
  if (needs_rgb(v) && !raw.has_rgb()) {
    throw Error(ErrorCode::modality_missing, std::string("variant ") + std::string(to_string(v)) + " needs RGB frames");
  }
  if (needs_depth(v) && !raw.has_depth()) {
    throw Error(ErrorCode::modality_missing, std::string("variant ") + std::string(to_string(v)) + " needs depth frames");
  }
  VariantOutput out;
  const int C = channels(v);
  out.clip = ClipTensor(raw.frames, raw.height, raw.width, C);
  const std::size_t hw = raw.pixels_per_frame();
  const std::size_t n = hw * static_cast<std::size_t>(raw.frames);
  float* dst = out.clip.data.data();

  std::vector<std::uint8_t> mask;
  if (v != InputVariant::rgb && v != InputVariant::depth) {
    if (opts.otsu_scope == OtsuScope::per_clip) {
      MaskResult m = binarize_depth_clip(raw.depth);
      out.degenerate_frames = m.degenerate ? raw.frames : 0;
      mask = std::move(m.mask);
    } else {
      mask.reserve(n);
      for (int t = 0; t < raw.frames; ++t) {
        MaskResult m = binarize_depth(raw.depth_frame(t));
        if (m.degenerate) ++out.degenerate_frames;
        mask.insert(mask.end(), m.mask.begin(), m.mask.end());
      }
    }
  }

  constexpr float inv255 = 1.0f / 255.0f;
  for (std::size_t i = 0; i < n; ++i) {
    float* px = dst + i * C;
    switch (v) {
      case InputVariant::rgb:
        for (int c = 0; c < 3; ++c) px[c] = raw.rgb[3 * i + c] * inv255;
        break;
      case InputVariant::depth:
        px[0] = opts.depth(raw.depth[i]);
        break;
      case InputVariant::binary_hand:
        px[0] = mask[i] ? 1.0f : 0.0f;
        break;
      case InputVariant::hand_3d:
        px[0] = mask[i] ? opts.depth(raw.depth[i]) : 0.0f;
        break;
      case InputVariant::gray_hand:
        px[0] = mask[i] ? luma_bt601(raw.rgb[3 * i], raw.rgb[3 * i + 1], raw.rgb[3 * i + 2]) * inv255 : 0.0f;
        break;
      case InputVariant::color_hand:
        for (int c = 0; c < 3; ++c) px[c] = mask[i] ? raw.rgb[3 * i + c] * inv255 : 0.0f;
        break;
      case InputVariant::color_hand_3d:
        for (int c = 0; c < 3; ++c) px[c] = mask[i] ? raw.rgb[3 * i + c] * inv255 : 0.0f;
        px[3] = mask[i] ? opts.depth(raw.depth[i]) : 0.0f;
        break;
    }
  }
  return out;
}

}  // namespace ehi::ablate
