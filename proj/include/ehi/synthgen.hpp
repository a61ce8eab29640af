#pragma once

// Procedural RGB-D gesture corpora with independently controllable subject
// factors. The "hand" is a superellipse palm with capsule fingers; each
// SubjectSignature field drives exactly one rendering channel:
//
//   shape_scale, aspect        -> silhouette (2D shape)
//   depth_offset_mm, curvature -> depth inside the silhouette only
//   texture_freq, phase        -> luminance pattern inside the hand
//   hue_deg                    -> chroma at constant BT.601 luma
//   tempo                      -> speed along the gesture trajectory
//
// All per-clip randomness (placement jitter, length, sensor noise, background
// layout) is keyed by (seed, gesture, place, repeat) and never by subject, so
// two subjects that share a factor render identically through it.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ehi/corpus.hpp"
#include "ehi/kvconfig.hpp"

namespace ehi::synth {

struct SubjectSignature {
  double shape_scale = 1.0;
  double aspect = 1.0;
  double depth_offset_mm = 500.0;
  double depth_curvature = 60.0;  // mm added at the silhouette rim
  double texture_freq = 0.12;     // cycles per pixel in hand coordinates
  double texture_phase = 0.0;     // radians, [0, 2*pi)
  double hue_deg = 30.0;
  double tempo = 1.0;

  friend bool operator==(const SubjectSignature&, const SubjectSignature&) = default;
};

enum class PathFamily { linear, circle, zigzag, figure8 };
enum class PoseSchedule { steady, open_close, rotate, wave };

std::string_view to_string(PathFamily p) noexcept;
std::string_view to_string(PoseSchedule p) noexcept;
PathFamily parse_path_family(std::string_view s);
PoseSchedule parse_pose_schedule(std::string_view s);

struct GestureScript {
  int gesture_id = 1;
  PathFamily path = PathFamily::linear;
  double direction_deg = 0.0;
  double amplitude = 0.18;  // fraction of frame height
  PoseSchedule pose = PoseSchedule::steady;
  int base_length = 24;
};

/// Default script for gesture id g: (path, pose) pairs are distinct for g <= 16.
GestureScript default_gesture(int gesture_id);

enum class BackgroundMode { clean, confounded };

struct PlaceStyle {
  corpus::Place place = corpus::Place::indoor;
  BackgroundMode mode = BackgroundMode::clean;
  int subject_index = 0;  // only read in confounded indoor scenes
};

struct SynthConfig {
  std::vector<SubjectSignature> subjects;
  std::vector<GestureScript> gestures;
  int repeats_per_cell = 2;
  std::vector<corpus::Place> places = {corpus::Place::indoor, corpus::Place::outdoor};
  BackgroundMode background = BackgroundMode::clean;
  int frame_height = 128;
  int frame_width = 171;
  int length_jitter_min = -4;
  int length_jitter_max = 4;
  std::uint64_t seed = 1;
  int gray_level = 140;  // hand luma before texture
  int chroma = 30;
  double texture_amplitude = 22.0;
  std::string preset;
};

/// Throws config error describing the first invalid field.
void validate(const SynthConfig& cfg);

struct PresetParams {
  int subjects = 4;
  int gestures = 4;
  int repeats = 2;
  std::uint64_t seed = 1;
};

std::vector<std::string_view> preset_names();
SynthConfig make_preset(std::string_view name, const PresetParams& params = {});

/// `[corpus]` plus optional repeated `[subject]` / `[gesture]` sections.
SynthConfig config_from_kv(const kv::Document& doc);
SynthConfig load_config(const std::filesystem::path& path);
kv::Document config_to_kv(const SynthConfig& cfg);

struct RenderedClip {
  corpus::RawClip clip;
  std::vector<std::uint8_t> silhouette;  // T*H*W ground-truth hand mask
};

struct FrameGeometry {
  double center_x = 0.0;
  double center_y = 0.0;
  double rotation = 0.0;
  double spread = 0.5;
};

/// Trajectory/pose state of frame t (before placement jitter).
FrameGeometry frame_geometry(const SubjectSignature& sig, const GestureScript& script,
                             int frame_height, int frame_width, int t);

RenderedClip render_clip(const SubjectSignature& sig, const GestureScript& script,
                         const PlaceStyle& style, int length, std::uint64_t seed,
                         const SynthConfig& cfg);

/// Seed of the (gesture, place, repeat) cell; subject-independent.
std::uint64_t cell_seed(std::uint64_t corpus_seed, int gesture_id, corpus::Place place, int repeat);
int cell_length(const SynthConfig& cfg, const GestureScript& script, std::uint64_t seed);

std::string clip_id_for(int subject_id, int gesture_id, corpus::Place place, int repeat);

/// Renders every (subject, gesture, place, repeat) cell under `out_dir/clips`
/// and writes `out_dir/manifest.jsonl`. Subject ids are 1-based positions in
/// cfg.subjects, gesture ids come from the scripts.
corpus::Manifest generate_corpus(const SynthConfig& cfg, const std::filesystem::path& out_dir);

/// Exactly representable RGB whose BT.601 luma equals `luma`, as close as
/// possible to the ideal constant-luma color at `hue_deg`/`chroma`.
struct Rgb8 {
  std::uint8_t r, g, b;
};
Rgb8 constant_luma_color(int luma, double hue_deg, double chroma);

}  // namespace ehi::synth
