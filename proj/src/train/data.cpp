#include <algorithm>

#include "ehi/dataset.hpp"
#include "ehi/error.hpp"

namespace ehi::data {

ablate::ClipTensor prepare_tensor(const corpus::RawClip& raw, const PrepareOptions& opts) {
  ablate::VariantOutput v = ablate::apply_variant(raw, opts.variant, opts.variant_options);
  const bool binary = opts.variant == ablate::InputVariant::binary_hand;
  return ablate::pad_clip(ablate::resize_clip(v.clip, ablate::kResizeHeight, ablate::kResizeWidth, binary));
}

std::filesystem::path cache_file(const std::filesystem::path& dir, const std::string& clip_id,
                                 ablate::InputVariant v) {
  return dir / (clip_id + "." + std::string(ablate::to_string(v)) + ".ehit");
}

PreparedClip prepare_clip(const corpus::Manifest& m, const corpus::ClipRecord& r, const PrepareOptions& opts) {
  PreparedClip out;
  out.clip_id = r.clip_id;
  out.subject_id = r.subject_id;
  out.gesture_id = r.gesture_id;
  out.place = r.place;
  out.num_frames = r.num_frames;
  if (!opts.cache_dir.empty()) {
    const auto file = cache_file(opts.cache_dir, r.clip_id, opts.variant);
    if (std::filesystem::exists(file)) {
      out.clip = ablate::read_packed(file);
      if (out.clip.channels != ablate::channels(opts.variant) || out.clip.height != ablate::kResizeHeight ||
          out.clip.width != ablate::kResizeWidth) {
        throw Error(ErrorCode::invalid_argument, "cached tensor " + file.string() + " does not match variant " +
                                                     std::string(ablate::to_string(opts.variant)));
      }
      return out;
    }
  }
  if (ablate::needs_depth(opts.variant) && !r.has_depth) {
    throw Error(ErrorCode::modality_missing, "clip " + r.clip_id + " has no depth but variant " +
                                                 std::string(ablate::to_string(opts.variant)) + " needs it");
  }
  out.clip = prepare_tensor(corpus::read_clip(m, r), opts);
  if (!opts.cache_dir.empty()) {
    std::filesystem::create_directories(opts.cache_dir);
    ablate::write_packed(cache_file(opts.cache_dir, r.clip_id, opts.variant), out.clip);
  }
  return out;
}

std::vector<PreparedClip> prepare_clips(const corpus::Manifest& m, const PrepareOptions& opts) {
  std::vector<PreparedClip> out;
  out.reserve(m.size());
  for (const auto& r : m.records) out.push_back(prepare_clip(m, r, opts));
  return out;
}

LabelMap::LabelMap(std::vector<int> ids) : ids_(std::move(ids)) {
  std::sort(ids_.begin(), ids_.end());
  ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
}

LabelMap LabelMap::subjects(const std::vector<PreparedClip>& clips) {
  std::vector<int> ids;
  for (const auto& c : clips) ids.push_back(c.subject_id);
  return LabelMap(std::move(ids));
}

LabelMap LabelMap::gestures(const std::vector<PreparedClip>& clips) {
  std::vector<int> ids;
  for (const auto& c : clips) ids.push_back(c.gesture_id);
  return LabelMap(std::move(ids));
}

int LabelMap::index_of(int id) const noexcept {
  auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
  return it != ids_.end() && *it == id ? static_cast<int>(it - ids_.begin()) : -1;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  auto splitmix = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  return splitmix(splitmix(splitmix(a) ^ b) ^ c);
}

ablate::ClipTensor training_sample(const ablate::ClipTensor& clip, std::uint64_t seed) {
  ablate::ClipTensor window = ablate::sample_training_window(clip, mix_seed(seed, 1));
  const auto origin = ablate::crop_origin(window.height, window.width, ablate::CropMode::train, mix_seed(seed, 2));
  return ablate::crop_clip(window, origin);
}

ablate::ClipTensor test_view(const ablate::ClipTensor& clip) {
  return ablate::crop_clip(clip, ablate::crop_origin(clip.height, clip.width, ablate::CropMode::test, 0));
}

}  // namespace ehi::data
