#pragma once

// Dataset manifests, clip storage and the split/pairing logic used by the
// experiments. A manifest is a JSON Lines file, one ClipRecord per line.
// Clip frames live under `<path>/rgb/%06d.png` (8-bit RGB) and
// `<path>/depth/%06d.png` (16-bit gray, millimetres, 0 = no reading).

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ehi::corpus {

namespace fs = std::filesystem;

enum class Place { indoor, outdoor };

std::string_view to_string(Place p) noexcept;
Place parse_place(std::string_view s);

struct ClipRecord {
  std::string clip_id;
  int subject_id = 1;
  int gesture_id = 1;
  Place place = Place::indoor;
  int num_frames = 1;
  std::string path;  // relative paths resolve against Manifest::root
  bool has_depth = false;

  friend bool operator==(const ClipRecord&, const ClipRecord&) = default;
};

struct Manifest {
  std::vector<ClipRecord> records;
  std::string provenance;
  fs::path root;  // directory relative record paths resolve against

  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }
  fs::path resolve(const ClipRecord& r) const;
  const ClipRecord* find(std::string_view clip_id) const;

  /// Same root and provenance, different records.
  Manifest with_records(std::vector<ClipRecord> recs) const;
};

struct LoadOptions {
  bool check_files = true;
};

/// Parses a JSON Lines manifest. Blank lines are skipped. Provenance is read
/// from an optional sidecar `<path>.provenance` text file.
Manifest load_manifest(const fs::path& path, LoadOptions opts = {});
void save_manifest(const Manifest& m, const fs::path& path);
std::string to_json_line(const ClipRecord& r);

/// Throws duplicate_id naming the first repeated id.
void check_unique_ids(std::span<const ClipRecord> records);

struct PlaceSplit {
  Manifest train;  // indoor
  Manifest eval;   // outdoor
};
PlaceSplit split_by_place(const Manifest& m);

struct SubjectSplit {
  Manifest train, val, test;
};
SubjectSplit split_subjects(const Manifest& m, const std::set<int>& train_ids,
                            const std::set<int>& val_ids,
                            const std::set<int>& test_ids);

struct GestureSplit {
  Manifest seen;    // even gesture ids
  Manifest unseen;  // odd gesture ids
};
GestureSplit split_gestures_even(const Manifest& m);

enum class PairLabel { same, different };

struct VerificationPair {
  std::string clip_a;  // indoor
  std::string clip_b;  // outdoor
  PairLabel label = PairLabel::different;

  friend bool operator==(const VerificationPair&, const VerificationPair&) = default;
};

struct PairSet {
  std::vector<VerificationPair> pairs;
  std::size_t positives() const;
};

/// Every (indoor, outdoor) pair sharing a gesture id, sorted by (a, b).
PairSet enumerate_verification_pairs(const Manifest& indoor, const Manifest& outdoor);

struct RawClip {
  int frames = 0;
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> rgb;     // T*H*W*3, empty when absent
  std::vector<std::uint16_t> depth;  // T*H*W millimetres, empty when absent

  bool has_rgb() const noexcept { return !rgb.empty(); }
  bool has_depth() const noexcept { return !depth.empty(); }
  std::size_t pixels_per_frame() const noexcept {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  }
  std::span<const std::uint8_t> rgb_frame(int t) const;
  std::span<const std::uint16_t> depth_frame(int t) const;

  friend bool operator==(const RawClip&, const RawClip&) = default;
};

RawClip read_clip(const Manifest& m, const ClipRecord& r);
RawClip read_clip_dir(const fs::path& dir, int num_frames, bool has_depth);
void write_clip(const RawClip& clip, const fs::path& dir);

fs::path rgb_frame_path(const fs::path& clip_dir, int t);
fs::path depth_frame_path(const fs::path& clip_dir, int t);

// Named split presets matching the EgoGesture protocols.
namespace presets {

inline constexpr std::string_view place = "egogesture-place";
inline constexpr std::string_view verification_subjects = "egogesture-verification-subjects";
inline constexpr std::string_view even_gestures = "egogesture-even-gestures";

const std::set<int>& verification_train_subjects();
const std::set<int>& verification_val_subjects();
const std::set<int>& verification_test_subjects();

/// Outdoor clips sorted by clip_id; the first floor(n * 3892 / 7788) go to
/// validation, the rest to test.
std::pair<Manifest, Manifest> split_outdoor_val_test(const Manifest& outdoor);

std::vector<std::string_view> names();

/// Applies a named preset; returns named partitions (e.g. "train", "val", "test").
std::map<std::string, Manifest> apply(std::string_view name, const Manifest& m);

}  // namespace presets

}  // namespace ehi::corpus
