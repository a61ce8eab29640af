#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "ehi/ablate.hpp"
#include "ehi/error.hpp"

namespace ehi::ablate {
namespace {

struct Tap {
  int i0 = 0;
  int i1 = 0;
  float f = 0.0f;
};

// Half-pixel-centre source taps for one axis, clamped at the borders.
std::vector<Tap> make_taps(int in, int out) {
  std::vector<Tap> taps(static_cast<std::size_t>(out));
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const int i0 = static_cast<int>(std::floor(src));
    taps[o] = {i0, std::min(i0 + 1, in - 1), static_cast<float>(src - i0)};
  }
  return taps;
}

inline float lerp(float a, float b, float f) { return a + f * (b - a); }

}  // namespace

ClipTensor resize_clip(const ClipTensor& clip, int out_height, int out_width, bool rebinarize) {
  if (clip.height < 1 || clip.width < 1) throw Error(ErrorCode::invalid_argument, "resize_clip: empty frame");
  ClipTensor out(clip.frames, out_height, out_width, clip.channels);
  const auto ty = make_taps(clip.height, out_height);
  const auto tx = make_taps(clip.width, out_width);
  const int C = clip.channels;
  for (int t = 0; t < clip.frames; ++t) {
    for (int y = 0; y < out_height; ++y) {
      const Tap& vy = ty[y];
      for (int x = 0; x < out_width; ++x) {
        const Tap& vx = tx[x];
        for (int c = 0; c < C; ++c) {
          const float top = lerp(clip.at(t, vy.i0, vx.i0, c), clip.at(t, vy.i0, vx.i1, c), vx.f);
          const float bot = lerp(clip.at(t, vy.i1, vx.i0, c), clip.at(t, vy.i1, vx.i1, c), vx.f);
          float v = lerp(top, bot, vy.f);
          if (rebinarize) v = v >= 0.5f ? 1.0f : 0.0f;
          out.at(t, y, x, c) = v;
        }
      }
    }
  }
  return out;
}

CropOrigin crop_origin(int height, int width, CropMode mode, std::uint64_t seed, int size) {
  if (height < size || width < size) {
    throw Error(ErrorCode::invalid_argument, "crop larger than frame");
  }
  if (mode == CropMode::test) return {(height - size) / 2, (width - size) / 2};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> row(0, height - size), col(0, width - size);
  const int r = row(rng);
  return {r, col(rng)};
}

ClipTensor crop_clip(const ClipTensor& clip, CropOrigin origin, int size) {
  if (origin.row < 0 || origin.col < 0 || origin.row + size > clip.height || origin.col + size > clip.width) {
    throw Error(ErrorCode::invalid_argument, "crop window outside frame");
  }
  ClipTensor out(clip.frames, size, size, clip.channels);
  const std::size_t row_len = static_cast<std::size_t>(size) * clip.channels;
  for (int t = 0; t < clip.frames; ++t) {
    for (int y = 0; y < size; ++y) {
      const float* src = &clip.data[clip.index(t, origin.row + y, origin.col, 0)];
      std::copy(src, src + row_len, &out.data[out.index(t, y, 0, 0)]);
    }
  }
  return out;
}

ClipTensor resize_and_crop(const ClipTensor& clip, CropMode mode, std::uint64_t seed, bool rebinarize) {
  ClipTensor resized = resize_clip(clip, kResizeHeight, kResizeWidth, rebinarize);
  return crop_clip(resized, crop_origin(kResizeHeight, kResizeWidth, mode, seed));
}

ClipTensor pad_clip(const ClipTensor& clip, int min_len) {
  if (clip.frames < 1) throw Error(ErrorCode::invalid_argument, "pad_clip: clip has no frames");
  if (clip.frames >= min_len) return clip;
  const int d = min_len - clip.frames;
  const int front = (d + 1) / 2;
  const int back = d / 2;
  ClipTensor out(min_len, clip.height, clip.width, clip.channels);
  const std::size_t fs = clip.frame_size();
  auto copy_frame = [&](int src_t, int dst_t) {
    std::copy_n(clip.data.begin() + static_cast<std::ptrdiff_t>(fs * src_t), fs,
                out.data.begin() + static_cast<std::ptrdiff_t>(fs * dst_t));
  };
  int dst = 0;
  for (int i = 0; i < front; ++i) copy_frame(0, dst++);
  for (int t = 0; t < clip.frames; ++t) copy_frame(t, dst++);
  for (int i = 0; i < back; ++i) copy_frame(clip.frames - 1, dst++);
  return out;
}

ClipTensor slice_frames(const ClipTensor& clip, int start, int count) {
  if (start < 0 || count < 0 || start + count > clip.frames) {
    throw Error(ErrorCode::invalid_argument, "slice_frames: range outside clip");
  }
  ClipTensor out(count, clip.height, clip.width, clip.channels);
  const std::size_t fs = clip.frame_size();
  std::copy_n(clip.data.begin() + static_cast<std::ptrdiff_t>(fs * start), fs * count, out.data.begin());
  return out;
}

int sample_window_offset(int frames, std::uint64_t seed, int window) {
  if (frames < window) throw Error(ErrorCode::invalid_argument, "clip shorter than window; pad first");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> start(0, frames - window);
  return start(rng);
}

ClipTensor sample_training_window(const ClipTensor& clip, std::uint64_t seed) {
  return slice_frames(clip, sample_window_offset(clip.frames, seed), kWindowLength);
}

namespace {

constexpr char kMagic[4] = {'E', 'H', 'I', 'T'};

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4] = {};
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_packed(const std::filesystem::path& path, const ClipTensor& clip) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out.write(kMagic, 4);
  put_u32(out, 1);
  for (int v : {clip.frames, clip.height, clip.width, clip.channels}) put_u32(out, static_cast<std::uint32_t>(v));
  put_u32(out, 0);
  for (float f : clip.data) put_u32(out, std::bit_cast<std::uint32_t>(f));
  if (!out) throw Error(ErrorCode::io, "short write to " + path.string());
}

ClipTensor read_packed(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw Error(ErrorCode::io, "not a packed tensor file: " + path.string());
  if (get_u32(in) != 1) throw Error(ErrorCode::io, "unsupported packed tensor version: " + path.string());
  const int t = static_cast<int>(get_u32(in)), h = static_cast<int>(get_u32(in)),
            w = static_cast<int>(get_u32(in)), c = static_cast<int>(get_u32(in));
  if (get_u32(in) != 0) throw Error(ErrorCode::io, "unsupported packed tensor dtype: " + path.string());
  ClipTensor clip(t, h, w, c);
  for (float& f : clip.data) f = std::bit_cast<float>(get_u32(in));
  if (!in) throw Error(ErrorCode::io, "truncated packed tensor: " + path.string());
  return clip;
}

}  // namespace ehi::ablate
