#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace ehi::png {

struct Image8 {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 or 3
  std::vector<std::uint8_t> data;
};

struct Image16 {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> data;  // host byte order
};

// Writers use fixed compression settings and no ancillary chunks so the
// output bytes depend only on the pixels.
void write_rgb8(const std::filesystem::path& path, int width, int height,
                std::span<const std::uint8_t> rgb);
void write_gray8(const std::filesystem::path& path, int width, int height,
                 std::span<const std::uint8_t> gray);
void write_gray16(const std::filesystem::path& path, int width, int height,
                  std::span<const std::uint16_t> gray);

/// Reads 8-bit gray or RGB; palette/alpha inputs are converted to RGB.
Image8 read8(const std::filesystem::path& path);
Image16 read_gray16(const std::filesystem::path& path);

}  // namespace ehi::png
