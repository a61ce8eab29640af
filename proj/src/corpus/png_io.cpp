#include "ehi/png_io.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <memory>
#include <string>

#include "ehi/error.hpp"

namespace ehi::png {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f != nullptr) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw Error(ErrorCode::io, "cannot open " + path.string());
  return f;
}

void write_impl(const std::filesystem::path& path, int width, int height,
                int color_type, int bit_depth, const std::uint8_t* rows_base,
                std::size_t row_bytes) {
  FilePtr f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) throw Error(ErrorCode::io, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    throw Error(ErrorCode::io, "png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::io, "png write failed: " + path.string());
  }
  png_init_io(png, f.get());
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
               bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (bit_depth == 16) png_set_swap(png);  // host little-endian -> PNG big-endian
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(rows_base + static_cast<std::size_t>(y) * row_bytes));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void check_size(std::size_t got, std::size_t want, const std::filesystem::path& path) {
  if (got != want) {
    throw Error(ErrorCode::invalid_argument,
                "pixel buffer size mismatch writing " + path.string());
  }
}

struct Reader {
  FilePtr file;
  png_structp png = nullptr;
  png_infop info = nullptr;

  ~Reader() {
    if (png != nullptr) png_destroy_read_struct(&png, info != nullptr ? &info : nullptr, nullptr);
  }
};

}  // namespace

void write_rgb8(const std::filesystem::path& path, int width, int height,
                std::span<const std::uint8_t> rgb) {
  check_size(rgb.size(), static_cast<std::size_t>(width) * height * 3, path);
  write_impl(path, width, height, PNG_COLOR_TYPE_RGB, 8, rgb.data(),
             static_cast<std::size_t>(width) * 3);
}

void write_gray8(const std::filesystem::path& path, int width, int height,
                 std::span<const std::uint8_t> gray) {
  check_size(gray.size(), static_cast<std::size_t>(width) * height, path);
  write_impl(path, width, height, PNG_COLOR_TYPE_GRAY, 8, gray.data(),
             static_cast<std::size_t>(width));
}

void write_gray16(const std::filesystem::path& path, int width, int height,
                  std::span<const std::uint16_t> gray) {
  check_size(gray.size(), static_cast<std::size_t>(width) * height, path);
  write_impl(path, width, height, PNG_COLOR_TYPE_GRAY, 16,
             reinterpret_cast<const std::uint8_t*>(gray.data()),
             static_cast<std::size_t>(width) * 2);
}

namespace {

// Opens and reads the header; the caller configures transforms afterwards.
void open_reader(Reader& r, const std::filesystem::path& path) {
  r.file = open_file(path, "rb");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, r.file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw Error(ErrorCode::io, "not a PNG file: " + path.string());
  }
  r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (r.png == nullptr) throw Error(ErrorCode::io, "png_create_read_struct failed");
  r.info = png_create_info_struct(r.png);
  if (r.info == nullptr) throw Error(ErrorCode::io, "png_create_info_struct failed");
}

}  // namespace

Image8 read8(const std::filesystem::path& path) {
  Reader r;
  open_reader(r, path);
  Image8 img;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(r.png))) {
    throw Error(ErrorCode::io, "corrupt PNG: " + path.string());
  }
  png_init_io(r.png, r.file.get());
  png_set_sig_bytes(r.png, 8);
  png_read_info(r.png, r.info);
  const int color = png_get_color_type(r.png, r.info);
  const int depth = png_get_bit_depth(r.png, r.info);
  if (depth == 16) png_set_strip_16(r.png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(r.png);
  if ((color & PNG_COLOR_MASK_ALPHA) != 0) png_set_strip_alpha(r.png);
  png_read_update_info(r.png, r.info);
  img.width = static_cast<int>(png_get_image_width(r.png, r.info));
  img.height = static_cast<int>(png_get_image_height(r.png, r.info));
  img.channels = png_get_channels(r.png, r.info);
  const std::size_t row_bytes = png_get_rowbytes(r.png, r.info);
  img.data.resize(row_bytes * static_cast<std::size_t>(img.height));
  rows.resize(static_cast<std::size_t>(img.height));
  for (int y = 0; y < img.height; ++y) rows[y] = img.data.data() + static_cast<std::size_t>(y) * row_bytes;
  png_read_image(r.png, rows.data());
  png_read_end(r.png, nullptr);
  return img;
}

Image16 read_gray16(const std::filesystem::path& path) {
  Reader r;
  open_reader(r, path);
  Image16 img;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(r.png))) {
    throw Error(ErrorCode::io, "corrupt PNG: " + path.string());
  }
  png_init_io(r.png, r.file.get());
  png_set_sig_bytes(r.png, 8);
  png_read_info(r.png, r.info);
  if (png_get_color_type(r.png, r.info) != PNG_COLOR_TYPE_GRAY ||
      png_get_bit_depth(r.png, r.info) != 16) {
    throw Error(ErrorCode::io, "expected 16-bit grayscale PNG: " + path.string());
  }
  png_set_swap(r.png);
  png_read_update_info(r.png, r.info);
  img.width = static_cast<int>(png_get_image_width(r.png, r.info));
  img.height = static_cast<int>(png_get_image_height(r.png, r.info));
  img.data.resize(static_cast<std::size_t>(img.width) * img.height);
  rows.resize(static_cast<std::size_t>(img.height));
  for (int y = 0; y < img.height; ++y) {
    rows[y] = reinterpret_cast<png_bytep>(img.data.data() + static_cast<std::size_t>(y) * img.width);
  }
  png_read_image(r.png, rows.data());
  png_read_end(r.png, nullptr);
  return img;
}

}  // namespace ehi::png
