#pragma once

// Clips materialized for a network: variant applied, resized to 128x171 and
// padded to at least 16 frames. Cropping and window selection happen per
// sample so the same PreparedClip serves training and evaluation.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "ehi/ablate.hpp"
#include "ehi/corpus.hpp"

namespace ehi::data {

struct PreparedClip {
  std::string clip_id;
  int subject_id = 0;
  int gesture_id = 0;
  corpus::Place place = corpus::Place::indoor;
  int num_frames = 0;  // before padding
  ablate::ClipTensor clip;
};

struct PrepareOptions {
  ablate::InputVariant variant = ablate::InputVariant::rgb;
  ablate::VariantOptions variant_options;
  std::filesystem::path cache_dir;  // optional packed-tensor cache
};

/// Variant, resize and padding for one clip (no crop).
ablate::ClipTensor prepare_tensor(const corpus::RawClip& raw, const PrepareOptions& opts);

PreparedClip prepare_clip(const corpus::Manifest& m, const corpus::ClipRecord& r, const PrepareOptions& opts);

/// Prepares every record in manifest order. With a cache directory, packed
/// files named by cache_file() are read when present and written otherwise.
std::vector<PreparedClip> prepare_clips(const corpus::Manifest& m, const PrepareOptions& opts);

std::filesystem::path cache_file(const std::filesystem::path& dir, const std::string& clip_id,
                                 ablate::InputVariant v);

/// Sorted distinct ids; class index = position.
class LabelMap {
 public:
  LabelMap() = default;
  explicit LabelMap(std::vector<int> ids);
  static LabelMap subjects(const std::vector<PreparedClip>& clips);
  static LabelMap gestures(const std::vector<PreparedClip>& clips);

  int size() const noexcept { return static_cast<int>(ids_.size()); }
  bool empty() const noexcept { return ids_.empty(); }
  /// -1 when the id is not part of the map.
  int index_of(int id) const noexcept;
  int id_of(int index) const { return ids_.at(static_cast<std::size_t>(index)); }
  const std::vector<int>& ids() const noexcept { return ids_; }

 private:
  std::vector<int> ids_;
};

/// Random 16-frame window and random 112x112 crop, keyed by `seed`.
ablate::ClipTensor training_sample(const ablate::ClipTensor& clip, std::uint64_t seed);

/// Center 112x112 crop of every frame.
ablate::ClipTensor test_view(const ablate::ClipTensor& clip);

/// Stateless 64-bit mixing of several values into one seed.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0);

}  // namespace ehi::data
