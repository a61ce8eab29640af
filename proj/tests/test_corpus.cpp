#include <algorithm>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "ehi/corpus.hpp"
#include "ehi/error.hpp"
#include "ehi/png_io.hpp"
#include "support.hpp"

namespace ehi {
namespace {

namespace fs = std::filesystem;

using corpus::Manifest;
using corpus::Place;
using testing::record;
using testing::TempDir;

void write_lines(const fs::path& p, const std::vector<std::string>& lines) {
  std::ofstream out(p);
  for (const auto& l : lines) out << l << "\n";
}

std::string line(const std::string& id, int subject = 1) {
  return R"({"clip_id":")" + id + R"(","subject_id":)" + std::to_string(subject) +
         R"(,"gesture_id":1,"place":"indoor","num_frames":1,"path":"x","has_depth":false})";
}

corpus::LoadOptions no_files() { return {false}; }

std::multiset<std::string> ids(const Manifest& m) {
  std::multiset<std::string> s;
  for (const auto& r : m.records) s.insert(r.clip_id);
  return s;
}

Manifest random_manifest(std::mt19937& rng, int n) {
  Manifest m;
  std::uniform_int_distribution<int> subj(1, 6), gest(1, 9), place(0, 1);
  for (int i = 0; i < n; ++i) {
    m.records.push_back(record("c" + std::to_string(i), subj(rng), gest(rng),
                               place(rng) ? Place::outdoor : Place::indoor));
  }
  return m;
}

TEST(Manifest, EmptyFileHasNoRecords) {
  TempDir d;
  write_lines(d / "m.jsonl", {});
  EXPECT_TRUE(corpus::load_manifest(d / "m.jsonl").empty());
}

TEST(Manifest, DuplicateIdIsNamed) {
  TempDir d;
  write_lines(d / "m.jsonl", {line("a"), line("b"), line("a")});
  try {
    corpus::load_manifest(d / "m.jsonl", no_files());
    FAIL() << "expected duplicate_id";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::duplicate_id);
    EXPECT_NE(std::string(e.what()).find("'a'"), std::string::npos);
  }
}

TEST(Manifest, ParseErrorCarriesLineNumber) {
  TempDir d;
  write_lines(d / "m.jsonl", {line("a"), "{not json"});
  try {
    corpus::load_manifest(d / "m.jsonl", no_files());
    FAIL() << "expected parse error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::parse);
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos);
  }
}

TEST(Manifest, MissingFramesAreListed) {
  TempDir d;
  write_lines(d / "m.jsonl", {line("ghost")});
  try {
    corpus::load_manifest(d / "m.jsonl");
    FAIL() << "expected missing_files";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::missing_files);
    EXPECT_NE(std::string(e.what()).find("000000.png"), std::string::npos);
  }
}

TEST(Manifest, SaveLoadRoundTrip) {
  TempDir d;
  Manifest m;
  m.records = {record("a", 1, 2, Place::indoor, 5), record("b", 3, 4, Place::outdoor, 7)};
  m.records[1].has_depth = true;
  m.provenance = "unit test";
  corpus::save_manifest(m, d / "m.jsonl");
  const auto back = corpus::load_manifest(d / "m.jsonl", no_files());
  EXPECT_EQ(back.records, m.records);
  EXPECT_EQ(back.provenance, m.provenance);
}

TEST(Manifest, SyntheticCorpusCountAndPlaceSplit) {
  // 4 subjects x 4 gestures x 2 places x 2 repeats.
  TempDir d;
  const auto m = testing::make_corpus(d.path(), "clean", 4, 4, 2);
  EXPECT_EQ(m.size(), 64u);
  const auto reloaded = corpus::load_manifest(d / "manifest.jsonl");
  EXPECT_EQ(reloaded.records, m.records);
  const auto s = corpus::split_by_place(m);
  EXPECT_EQ(s.train.size(), 32u);
  EXPECT_EQ(s.eval.size(), 32u);
}

TEST(Splits, AllIndoorPlaceSplit) {
  Manifest m;
  m.records = {record("a", 1, 1, Place::indoor), record("b", 2, 1, Place::indoor)};
  const auto s = corpus::split_by_place(m);
  EXPECT_EQ(s.train.records, m.records);
  EXPECT_TRUE(s.eval.empty());
}

TEST(Splits, PlaceSplitPreservesOrder) {
  std::mt19937 rng(3);
  const auto m = random_manifest(rng, 40);
  const auto s = corpus::split_by_place(m);
  std::vector<corpus::ClipRecord> indoor, outdoor;
  for (const auto& r : m.records) (r.place == Place::indoor ? indoor : outdoor).push_back(r);
  EXPECT_EQ(s.train.records, indoor);
  EXPECT_EQ(s.eval.records, outdoor);
}

TEST(Splits, SubjectSingletons) {
  Manifest m;
  m.records = {record("a", 1, 1, Place::indoor), record("b", 2, 1, Place::indoor), record("c", 3, 1, Place::indoor)};
  const auto s = corpus::split_subjects(m, {1}, {2}, {3});
  ASSERT_EQ(s.train.size(), 1u);
  ASSERT_EQ(s.val.size(), 1u);
  ASSERT_EQ(s.test.size(), 1u);
  EXPECT_EQ(s.train.records[0].subject_id, 1);
  EXPECT_EQ(s.val.records[0].subject_id, 2);
  EXPECT_EQ(s.test.records[0].subject_id, 3);
}

TEST(Splits, OverlappingSubjectSetsNameTheSubject) {
  Manifest m;
  m.records = {record("a", 1, 1, Place::indoor), record("b", 2, 1, Place::indoor), record("c", 3, 1, Place::indoor)};
  try {
    corpus::split_subjects(m, {1, 2}, {2}, {3});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("overlap on subject(s) 2"), std::string::npos);
  }
}

TEST(Splits, UncoveredSubjectIsAnError) {
  Manifest m;
  m.records = {record("a", 1, 1, Place::indoor), record("b", 4, 1, Place::indoor)};
  EXPECT_THROW(corpus::split_subjects(m, {1}, {2}, {3}), Error);
}

TEST(Splits, VerificationPresetLists) {
  const auto& tr = corpus::presets::verification_train_subjects();
  const auto& va = corpus::presets::verification_val_subjects();
  const auto& te = corpus::presets::verification_test_subjects();
  EXPECT_EQ(tr.size(), 30u);
  EXPECT_EQ(va.size(), 10u);
  EXPECT_EQ(te.size(), 10u);
  std::set<int> all(tr.begin(), tr.end());
  all.insert(va.begin(), va.end());
  all.insert(te.begin(), te.end());
  EXPECT_EQ(all.size(), 50u);
  EXPECT_EQ(*all.begin(), 1);
  EXPECT_EQ(*all.rbegin(), 50);
  EXPECT_TRUE(tr.contains(3) && tr.contains(4) && tr.contains(5) && tr.contains(6) && tr.contains(8));
}

TEST(Splits, EvenGestures) {
  Manifest m;
  for (int g = 1; g <= 4; ++g) m.records.push_back(record("g" + std::to_string(g), 1, g, Place::indoor));
  const auto s = corpus::split_gestures_even(m);
  ASSERT_EQ(s.seen.size(), 2u);
  EXPECT_EQ(s.seen.records[0].gesture_id, 2);
  EXPECT_EQ(s.seen.records[1].gesture_id, 4);
  EXPECT_EQ(s.unseen.records[0].gesture_id, 1);
  EXPECT_EQ(s.unseen.records[1].gesture_id, 3);

  Manifest all;
  for (int g = 1; g <= 83; ++g) all.records.push_back(record("g" + std::to_string(g), 1, g, Place::indoor));
  const auto e = corpus::split_gestures_even(all);
  EXPECT_EQ(e.seen.size(), 41u);
  EXPECT_EQ(e.unseen.size(), 42u);

  const auto empty = corpus::split_gestures_even(Manifest{});
  EXPECT_TRUE(empty.seen.empty() && empty.unseen.empty());
}

TEST(Splits, EverySplitIsAPartition) {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = random_manifest(rng, 1 + trial);
    const auto want = ids(m);

    const auto p = corpus::split_by_place(m);
    auto got = ids(p.train);
    for (const auto& id : ids(p.eval)) got.insert(id);
    EXPECT_EQ(got, want);

    const auto g = corpus::split_gestures_even(m);
    got = ids(g.seen);
    for (const auto& id : ids(g.unseen)) got.insert(id);
    EXPECT_EQ(got, want);

    const auto s = corpus::split_subjects(m, {1, 2}, {3}, {4, 5, 6});
    got = ids(s.train);
    for (const auto& id : ids(s.val)) got.insert(id);
    for (const auto& id : ids(s.test)) got.insert(id);
    EXPECT_EQ(got, want);
  }
}

TEST(Splits, OutdoorValidationBlock) {
  Manifest outdoor;
  for (int i = 0; i < 7788; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "o%05d", 7787 - i);
    outdoor.records.push_back(record(id, 1, 1, Place::outdoor));
  }
  const auto [val, test] = corpus::presets::split_outdoor_val_test(outdoor);
  EXPECT_EQ(val.size(), 3892u);
  EXPECT_EQ(test.size(), 3896u);
  EXPECT_EQ(val.records.front().clip_id, "o00000");
  EXPECT_EQ(test.records.front().clip_id, "o03892");
}

TEST(Splits, NamedPresets) {
  Manifest m;
  for (int s = 1; s <= 50; ++s) {
    m.records.push_back(record("i" + std::to_string(s), s, 2, Place::indoor));
    m.records.push_back(record("o" + std::to_string(s), s, 3, Place::outdoor));
  }
  const auto place = corpus::presets::apply(corpus::presets::place, m);
  EXPECT_EQ(place.at("train").size(), 50u);
  EXPECT_EQ(place.at("val").size() + place.at("test").size(), 50u);
  const auto subj = corpus::presets::apply(corpus::presets::verification_subjects, m);
  EXPECT_EQ(subj.at("train").size(), 60u);
  EXPECT_EQ(subj.at("val").size(), 20u);
  EXPECT_EQ(subj.at("test").size(), 20u);
  const auto even = corpus::presets::apply(corpus::presets::even_gestures, m);
  EXPECT_EQ(even.at("seen").size(), 50u);
  EXPECT_EQ(even.at("unseen").size(), 50u);
  EXPECT_THROW(corpus::presets::apply("nope", m), Error);
}

TEST(Pairs, SinglePositive) {
  Manifest in, out;
  in.records = {record("a", 1, 1, Place::indoor)};
  out.records = {record("b", 1, 1, Place::outdoor)};
  const auto p = corpus::enumerate_verification_pairs(in, out);
  ASSERT_EQ(p.pairs.size(), 1u);
  EXPECT_EQ(p.pairs[0].label, corpus::PairLabel::same);
}

TEST(Pairs, TwoSubjectsOneGesture) {
  Manifest in, out;
  in.records = {record("i1", 1, 1, Place::indoor), record("i2", 2, 1, Place::indoor)};
  out.records = {record("o1", 1, 1, Place::outdoor), record("o2", 2, 1, Place::outdoor)};
  const auto p = corpus::enumerate_verification_pairs(in, out);
  EXPECT_EQ(p.pairs.size(), 4u);
  EXPECT_EQ(p.positives(), 2u);
}

TEST(Pairs, BruteForceCounts) {
  for (int S = 1; S <= 5; ++S) {
    for (int G = 1; G <= 5; ++G) {
      Manifest in, out;
      for (int s = 1; s <= S; ++s) {
        for (int g = 1; g <= G; ++g) {
          const std::string k = std::to_string(s) + "_" + std::to_string(g);
          in.records.push_back(record("i" + k, s, g, Place::indoor));
          out.records.push_back(record("o" + k, s, g, Place::outdoor));
        }
      }
      const auto p = corpus::enumerate_verification_pairs(in, out);
      EXPECT_EQ(p.pairs.size(), static_cast<std::size_t>(S * S * G));
      EXPECT_EQ(p.positives(), static_cast<std::size_t>(S * G));
      for (std::size_t i = 1; i < p.pairs.size(); ++i) {
        const auto& a = p.pairs[i - 1];
        const auto& b = p.pairs[i];
        EXPECT_TRUE(std::tie(a.clip_a, a.clip_b) < std::tie(b.clip_a, b.clip_b));
      }
      for (const auto& pr : p.pairs) {
        const auto* a = in.find(pr.clip_a);
        const auto* b = out.find(pr.clip_b);
        ASSERT_TRUE(a && b);
        EXPECT_EQ(a->gesture_id, b->gesture_id);
        EXPECT_EQ(pr.label == corpus::PairLabel::same, a->subject_id == b->subject_id);
      }
    }
  }
}

TEST(Pairs, EmptySideIsRejected) {
  Manifest in;
  in.records = {record("a", 1, 1, Place::indoor)};
  EXPECT_THROW(corpus::enumerate_verification_pairs(in, Manifest{}), Error);
}

corpus::RawClip pattern_clip(int frames, bool depth) {
  corpus::RawClip c;
  c.frames = frames;
  c.height = 5;
  c.width = 7;
  c.rgb.resize(static_cast<std::size_t>(frames) * 35 * 3);
  for (std::size_t i = 0; i < c.rgb.size(); ++i) c.rgb[i] = static_cast<std::uint8_t>(i * 37 % 256);
  if (depth) {
    c.depth.resize(static_cast<std::size_t>(frames) * 35);
    for (std::size_t i = 0; i < c.depth.size(); ++i) c.depth[i] = static_cast<std::uint16_t>(i * 977 % 65536);
  }
  return c;
}

TEST(ClipIo, RoundTripIsBitIdentical) {
  TempDir d;
  const auto clip = pattern_clip(3, true);
  corpus::write_clip(clip, d / "c");
  const auto back = corpus::read_clip_dir(d / "c", 3, true);
  EXPECT_EQ(back.frames, 3);
  EXPECT_EQ(back, clip);
}

TEST(ClipIo, NoDepthMeansAbsentDepth) {
  TempDir d;
  corpus::write_clip(pattern_clip(2, false), d / "c");
  const auto back = corpus::read_clip_dir(d / "c", 2, false);
  EXPECT_TRUE(back.has_rgb());
  EXPECT_FALSE(back.has_depth());
}

TEST(ClipIo, CorruptFrameNamesItsIndex) {
  TempDir d;
  corpus::write_clip(pattern_clip(3, false), d / "c");
  std::ofstream(corpus::rgb_frame_path(d / "c", 1), std::ios::trunc) << "garbage";
  try {
    corpus::read_clip_dir(d / "c", 3, false);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("rgb frame 1"), std::string::npos);
  }
}

TEST(ClipIo, SyntheticClipRoundTrip) {
  TempDir d;
  const auto m = testing::make_corpus(d.path(), "clean", 1, 1, 1);
  for (const auto& r : m.records) {
    const auto raw = corpus::read_clip(m, r);
    EXPECT_EQ(raw.frames, r.num_frames);
    corpus::write_clip(raw, d / ("copy_" + r.clip_id));
    EXPECT_EQ(corpus::read_clip_dir(d / ("copy_" + r.clip_id), r.num_frames, true), raw);
  }
}

TEST(Png, SixteenBitRoundTrip) {
  TempDir d;
  std::vector<std::uint16_t> px = {0, 1, 255, 256, 1500, 65535};
  png::write_gray16(d / "x.png", 3, 2, px);
  const auto img = png::read_gray16(d / "x.png");
  EXPECT_EQ(img.width, 3);
  EXPECT_EQ(img.height, 2);
  EXPECT_EQ(img.data, px);
}

}  // namespace
}  // namespace ehi
