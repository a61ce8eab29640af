#include <cmath>
#include <fstream>
#include <iterator>
#include <map>

#include <gtest/gtest.h>

#include "ehi/ablate.hpp"
#include "ehi/error.hpp"
#include "ehi/synthgen.hpp"
#include "support.hpp"

namespace ehi {
namespace {

namespace fs = std::filesystem;

using synth::SubjectSignature;
using testing::TempDir;

synth::SynthConfig small_config() {
  auto cfg = synth::make_preset("clean", {2, 2, 1, 7});
  return cfg;
}

synth::RenderedClip render(const SubjectSignature& sig, int gesture = 1, int length = 12,
                           corpus::Place place = corpus::Place::indoor) {
  const auto cfg = small_config();
  return synth::render_clip(sig, synth::default_gesture(gesture), {place, synth::BackgroundMode::clean, 0}, length,
                            99, cfg);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

TEST(Synth, ProductCount) {
  TempDir d;
  const auto m = synth::generate_corpus(small_config(), d.path());
  EXPECT_EQ(m.size(), 8u);
  std::set<std::string> ids;
  for (const auto& r : m.records) ids.insert(r.clip_id);
  EXPECT_EQ(ids.size(), 8u);
}

TEST(Synth, SameConfigGivesIdenticalFiles) {
  TempDir a, b;
  synth::generate_corpus(small_config(), a.path());
  synth::generate_corpus(small_config(), b.path());
  int compared = 0;
  for (const auto& e : fs::recursive_directory_iterator(a.path())) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), a.path());
    ASSERT_TRUE(fs::exists(b.path() / rel)) << rel;
    EXPECT_EQ(slurp(e.path()), slurp(b.path() / rel)) << rel;
    ++compared;
  }
  EXPECT_GT(compared, 16);
}

TEST(Synth, HueOnlySubjectsAreGrayIdenticalInsideTheHand) {
  SubjectSignature a, b;
  a.hue_deg = 120;
  b.hue_deg = 300;
  const auto ra = render(a), rb = render(b);
  ASSERT_EQ(ra.silhouette, rb.silhouette);
  const auto ga = ablate::to_gray(ra.clip.rgb), gb = ablate::to_gray(rb.clip.rgb);
  int inside = 0, rgb_differs = 0;
  for (std::size_t i = 0; i < ra.silhouette.size(); ++i) {
    if (!ra.silhouette[i]) continue;
    ++inside;
    EXPECT_EQ(ga[i], gb[i]) << "pixel " << i;
    rgb_differs += ra.clip.rgb[3 * i] != rb.clip.rgb[3 * i];
  }
  EXPECT_GT(inside, 100);
  EXPECT_GT(rgb_differs, inside / 2);
}

TEST(Synth, DepthOnlySubjectsAreRgbIdentical) {
  SubjectSignature a, b;
  b.depth_offset_mm = 700;
  b.depth_curvature = 20;
  const auto ra = render(a), rb = render(b);
  EXPECT_EQ(ra.clip.rgb, rb.clip.rgb);
  EXPECT_NE(ra.clip.depth, rb.clip.depth);
}

TEST(Synth, ShapeOnlySubjectsDifferInSilhouette) {
  SubjectSignature a, b;
  b.shape_scale = 1.3;
  const auto ra = render(a), rb = render(b);
  EXPECT_NE(ra.silhouette, rb.silhouette);
}

TEST(Synth, SingleFrameClipStartsAtTrajectoryStart) {
  const SubjectSignature sig;
  const auto r = render(sig, 1, 1);
  EXPECT_EQ(r.clip.frames, 1);
  const auto cfg = small_config();
  const auto g = synth::frame_geometry(sig, synth::default_gesture(1), cfg.frame_height, cfg.frame_width, 0);
  double sy = 0, sx = 0, n = 0;
  for (int y = 0; y < r.clip.height; ++y) {
    for (int x = 0; x < r.clip.width; ++x) {
      if (r.silhouette[static_cast<std::size_t>(y) * r.clip.width + x]) sy += y, sx += x, ++n;
    }
  }
  ASSERT_GT(n, 0);
  // Placement jitter and fingers shift the centroid by a few pixels at most.
  EXPECT_NEAR(sx / n, g.center_x, 12.0);
  EXPECT_NEAR(sy / n, g.center_y, 12.0);
}

int mode_of(const std::vector<std::uint16_t>& v) {
  std::map<int, int> hist;  // 50 mm bins
  for (auto d : v) hist[d / 50]++;
  int best = 0, count = -1;
  for (auto [bin, c] : hist) {
    if (c > count) best = bin, count = c;
  }
  return best * 50 + 25;
}

TEST(Synth, DepthIsBimodalWithWideGap) {
  const auto cfg = synth::make_preset("clean", {4, 2, 1, 3});
  for (const auto& sig : cfg.subjects) {
    const auto r = render(sig, 2, 6);
    const std::size_t hw = r.clip.pixels_per_frame();
    for (int t = 0; t < r.clip.frames; ++t) {
      std::vector<std::uint16_t> hand, back;
      std::uint16_t back_min = 65535;
      for (std::size_t i = 0; i < hw; ++i) {
        const std::size_t k = t * hw + i;
        if (r.clip.depth[k] == 0) continue;
        if (r.silhouette[k]) {
          hand.push_back(r.clip.depth[k]);
        } else {
          back.push_back(r.clip.depth[k]);
          back_min = std::min(back_min, r.clip.depth[k]);
        }
      }
      ASSERT_FALSE(hand.empty());
      EXPECT_GE(back_min, 1500);
      EXPECT_GE(mode_of(back) - mode_of(hand), 700);
    }
  }
}

std::pair<double, double> centroid(const synth::RenderedClip& r, int t) {
  const std::size_t hw = r.clip.pixels_per_frame();
  double sy = 0, sx = 0, n = 0;
  for (int y = 0; y < r.clip.height; ++y) {
    for (int x = 0; x < r.clip.width; ++x) {
      if (r.silhouette[t * hw + static_cast<std::size_t>(y) * r.clip.width + x]) sy += y, sx += x, ++n;
    }
  }
  return {sx / n, sy / n};
}

TEST(Synth, DoubledTempoDoublesDisplacement) {
  SubjectSignature slow, fast;
  fast.tempo = 2.0;
  // Gesture 1 is a straight path with a steady pose.
  ASSERT_EQ(synth::default_gesture(1).path, synth::PathFamily::linear);
  ASSERT_EQ(synth::default_gesture(1).pose, synth::PoseSchedule::steady);
  const auto rs = render(slow, 1, 4), rf = render(fast, 1, 4);
  const auto [sx0, sy0] = centroid(rs, 0);
  const auto [fx0, fy0] = centroid(rf, 0);
  for (int t = 1; t <= 2; ++t) {
    const auto [sx, sy] = centroid(rs, t);
    const auto [fx, fy] = centroid(rf, t);
    const double ds = std::hypot(sx - sx0, sy - sy0), df = std::hypot(fx - fx0, fy - fy0);
    EXPECT_GT(ds, 0.5);
    EXPECT_NEAR(df, 2.0 * ds, 1.0) << "frame " << t;
  }
}

TEST(Synth, ConstantLumaColors) {
  for (int luma : {60, 140, 200}) {
    for (double hue = 0; hue < 360; hue += 7.5) {
      const auto c = synth::constant_luma_color(luma, hue, 30);
      EXPECT_EQ(ablate::to_gray(c.r, c.g, c.b), luma) << "hue " << hue;
    }
  }
}

TEST(Synth, GestureScriptsAreDistinct) {
  std::set<std::pair<synth::PathFamily, synth::PoseSchedule>> seen;
  for (int g = 1; g <= 16; ++g) {
    const auto s = synth::default_gesture(g);
    EXPECT_EQ(s.gesture_id, g);
    seen.insert({s.path, s.pose});
  }
  EXPECT_EQ(seen.size(), 16u);
}

TEST(Synth, InvalidConfigIsRejected) {
  auto cfg = small_config();
  cfg.repeats_per_cell = 0;
  EXPECT_THROW(synth::validate(cfg), Error);
  cfg = small_config();
  cfg.subjects[0].depth_offset_mm = 1200;
  EXPECT_THROW(synth::validate(cfg), Error);
  EXPECT_THROW(synth::make_preset("no-such-preset"), Error);
}

TEST(Synth, ConfigTextRoundTrip) {
  for (auto name : synth::preset_names()) {
    const auto cfg = synth::make_preset(name, {3, 3, 1, 5});
    const auto back = synth::config_from_kv(synth::config_to_kv(cfg));
    EXPECT_EQ(back.subjects, cfg.subjects) << name;
    ASSERT_EQ(back.gestures.size(), cfg.gestures.size());
    for (std::size_t i = 0; i < cfg.gestures.size(); ++i) {
      EXPECT_EQ(back.gestures[i].gesture_id, cfg.gestures[i].gesture_id);
      EXPECT_EQ(back.gestures[i].path, cfg.gestures[i].path);
      EXPECT_EQ(back.gestures[i].pose, cfg.gestures[i].pose);
    }
    EXPECT_EQ(back.seed, cfg.seed);
    EXPECT_EQ(back.background, cfg.background);
    EXPECT_EQ(back.repeats_per_cell, cfg.repeats_per_cell);
  }
}

TEST(Synth, PresetsVaryOnlyTheirFactor) {
  const SubjectSignature base;
  auto only = [&](std::string_view preset, auto field) {
    const auto cfg = synth::make_preset(preset, {4, 1, 1, 1});
    for (const auto& s : cfg.subjects) {
      SubjectSignature reset = s;
      field(reset, base);
      EXPECT_EQ(reset, base) << preset;
    }
    EXPECT_NE(cfg.subjects[0], cfg.subjects[1]) << preset;
  };
  only("hue-only", [](SubjectSignature& s, const SubjectSignature& b) { s.hue_deg = b.hue_deg; });
  only("shape-only", [](SubjectSignature& s, const SubjectSignature& b) {
    s.shape_scale = b.shape_scale;
    s.aspect = b.aspect;
  });
  only("depth-only", [](SubjectSignature& s, const SubjectSignature& b) {
    s.depth_offset_mm = b.depth_offset_mm;
    s.depth_curvature = b.depth_curvature;
  });
  only("texture-only", [](SubjectSignature& s, const SubjectSignature& b) {
    s.texture_freq = b.texture_freq;
    s.texture_phase = b.texture_phase;
  });
}

TEST(Synth, CellSeedIgnoresSubjects) {
  auto cfg = small_config();
  const auto seed = synth::cell_seed(cfg.seed, 1, corpus::Place::indoor, 0);
  EXPECT_EQ(seed, synth::cell_seed(cfg.seed, 1, corpus::Place::indoor, 0));
  EXPECT_NE(seed, synth::cell_seed(cfg.seed, 1, corpus::Place::outdoor, 0));
  EXPECT_NE(seed, synth::cell_seed(cfg.seed + 1, 1, corpus::Place::indoor, 0));
}

}  // namespace
}  // namespace ehi
