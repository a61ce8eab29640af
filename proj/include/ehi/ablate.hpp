#pragma once

// Controlled input variants and all geometric/temporal preprocessing.
//
// Clip tensors are float, T x H x W x C row-major, values in [0, 1].
// Depth is normalised nearer-is-brighter: a valid reading d maps to
// (far - clamp(d, near, far - 1)) / (far - near), so any valid pixel is
// strictly positive and 0 is reserved for "no reading" or masked-out.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ehi/corpus.hpp"

namespace ehi::ablate {

enum class InputVariant { rgb, depth, binary_hand, hand_3d, gray_hand, color_hand, color_hand_3d };

inline constexpr std::array<InputVariant, 7> kAllVariants = {
    InputVariant::rgb,       InputVariant::depth,      InputVariant::binary_hand,
    InputVariant::hand_3d,   InputVariant::gray_hand,  InputVariant::color_hand,
    InputVariant::color_hand_3d};

int channels(InputVariant v) noexcept;
bool needs_depth(InputVariant v) noexcept;
bool needs_rgb(InputVariant v) noexcept;
std::string_view to_string(InputVariant v) noexcept;
InputVariant parse_variant(std::string_view name);

inline constexpr int kResizeWidth = 171;
inline constexpr int kResizeHeight = 128;
inline constexpr int kCropSize = 112;
inline constexpr int kWindowLength = 16;

struct ClipTensor {
  int frames = 0;
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> data;

  ClipTensor() = default;
  ClipTensor(int t, int h, int w, int c, float fill = 0.0f);

  std::size_t frame_size() const noexcept {
    return static_cast<std::size_t>(height) * width * channels;
  }
  std::size_t index(int t, int y, int x, int c) const noexcept {
    return ((static_cast<std::size_t>(t) * height + y) * width + x) * channels + c;
  }
  float& at(int t, int y, int x, int c) noexcept { return data[index(t, y, x, c)]; }
  float at(int t, int y, int x, int c) const noexcept { return data[index(t, y, x, c)]; }

  friend bool operator==(const ClipTensor&, const ClipTensor&) = default;
};

struct ProcessedClip {
  ClipTensor data;
  InputVariant variant = InputVariant::rgb;
  std::string source_clip_id;
};

// --- Otsu / binarisation ---------------------------------------------------

struct OtsuResult {
  int threshold = 0;
  bool degenerate = false;  // all mass in a single bin
};

/// Threshold t maximising between-class variance of {<= t} vs {> t}; ties go
/// to the smallest t. Comparisons are exact (integer arithmetic).
OtsuResult otsu_threshold(std::span<const std::uint64_t, 256> hist);

struct MaskResult {
  std::vector<std::uint8_t> mask;
  int threshold = 0;       // Otsu bin over the quantised valid range
  bool degenerate = false; // fewer than two distinct valid depths
};

/// Valid (nonzero) depths are quantised to 256 bins over [min, max] of the
/// frame, Otsu-split, and the nearer class becomes the hand (mask = 1).
MaskResult binarize_depth(std::span<const std::uint16_t> depth_frame);

/// Same rule with one histogram and range over every frame of a clip.
MaskResult binarize_depth_clip(std::span<const std::uint16_t> depth);

// --- Colour / depth --------------------------------------------------------

std::uint8_t to_gray(std::uint8_t r, std::uint8_t g, std::uint8_t b) noexcept;
std::vector<std::uint8_t> to_gray(std::span<const std::uint8_t> rgb);

struct DepthNormalization {
  double near_mm = 300.0;
  double far_mm = 1500.0;
  float operator()(std::uint16_t depth_mm) const noexcept;
};

enum class OtsuScope { per_frame, per_clip };

struct VariantOptions {
  DepthNormalization depth;
  OtsuScope otsu_scope = OtsuScope::per_frame;
};

struct VariantOutput {
  ClipTensor clip;
  int degenerate_frames = 0;  // frames whose depth could not be binarised
};

/// Builds the requested variant at the clip's native resolution.
/// Throws modality_missing when the variant needs RGB or depth that is absent.
VariantOutput apply_variant(const corpus::RawClip& raw, InputVariant v, const VariantOptions& opts = {});

/// Hand masks (T*H*W) using the same Otsu rule as the variants.
MaskResult hand_masks(const corpus::RawClip& raw, OtsuScope scope = OtsuScope::per_frame);

// --- Geometry --------------------------------------------------------------

/// Bilinear resize with half-pixel centres; `rebinarize` thresholds at 0.5.
ClipTensor resize_clip(const ClipTensor& clip, int out_height = kResizeHeight,
                       int out_width = kResizeWidth, bool rebinarize = false);

enum class CropMode { train, test };

struct CropOrigin {
  int row = 0;
  int col = 0;
  friend bool operator==(const CropOrigin&, const CropOrigin&) = default;
};

/// Centred in test mode; uniform over valid origins (seeded) in train mode.
CropOrigin crop_origin(int height, int width, CropMode mode, std::uint64_t seed, int size = kCropSize);
ClipTensor crop_clip(const ClipTensor& clip, CropOrigin origin, int size = kCropSize);
ClipTensor resize_and_crop(const ClipTensor& clip, CropMode mode, std::uint64_t seed, bool rebinarize = false);

/// Pads to `min_len` frames: ceil(d/2) copies of the first frame in front,
/// floor(d/2) copies of the last frame at the back.
ClipTensor pad_clip(const ClipTensor& clip, int min_len = kWindowLength);

ClipTensor slice_frames(const ClipTensor& clip, int start, int count);
int sample_window_offset(int frames, std::uint64_t seed, int window = kWindowLength);
ClipTensor sample_training_window(const ClipTensor& clip, std::uint64_t seed);

// --- Packed tensor files ---------------------------------------------------
//
// Little-endian: "EHIT" magic, u32 version (1), u32 T, H, W, C, u32 dtype
// (0 = float32), then T*H*W*C values in row-major order.

void write_packed(const std::filesystem::path& path, const ClipTensor& clip);
ClipTensor read_packed(const std::filesystem::path& path);

}  // namespace ehi::ablate
