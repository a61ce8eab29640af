#include <array>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "ehi/experiment.hpp"
#include "support.hpp"

namespace ehi {
namespace {

namespace fs = std::filesystem;
using cli::ExperimentConfig;

ExperimentConfig from(const std::vector<std::string>& overrides) {
  return cli::resolve(cli::load_document(std::nullopt, overrides));
}

ErrorCode code_of(const std::vector<std::string>& overrides) {
  try {
    from(overrides);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::runtime;
}

std::string message_of(const std::vector<std::string>& overrides) {
  try {
    from(overrides);
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

TEST(Config, Defaults) {
  const auto c = from({});
  EXPECT_EQ(c.seed, 1u);
  EXPECT_EQ(c.output_dir, "runs");
  EXPECT_EQ(c.data.split, "place");
  EXPECT_EQ(c.variant.variant, ablate::InputVariant::rgb);
  EXPECT_FALSE(c.variant.name_given);
  EXPECT_EQ(c.train.batch_size, 32);
  EXPECT_DOUBLE_EQ(c.train.lr, 1e-4);
  EXPECT_EQ(c.train.epochs, 20);
  EXPECT_EQ(c.train.lr_decay_epoch, 10);
  EXPECT_EQ(c.eval.head, cli::HeadChoice::automatic);
}

TEST(Config, OverridesApply) {
  const auto c = from({"experiment.seed=7", "variant.name=3d-color-hand", "train.objective=adversarial",
                       "data.split=subjects", "data.train_subjects=1-3,5", "data.test_subjects=4"});
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.train.seed, 7u);
  EXPECT_EQ(c.variant.variant, ablate::InputVariant::color_hand_3d);
  EXPECT_EQ(c.train.variant, ablate::InputVariant::color_hand_3d);
  EXPECT_TRUE(c.variant.name_given);
  EXPECT_EQ(c.train.objective, train::Objective::adversarial);
  EXPECT_EQ(c.data.train_subjects, (std::set<int>{1, 2, 3, 5}));
}

TEST(Config, UnknownKeysAndSectionsAreConfigErrors) {
  EXPECT_EQ(code_of({"train.foo=1"}), ErrorCode::config);
  EXPECT_NE(message_of({"train.foo=1"}).find("train.foo"), std::string::npos);
  EXPECT_EQ(code_of({"bogus.key=1"}), ErrorCode::config);
  EXPECT_NE(message_of({"bogus.key=1"}).find("bogus"), std::string::npos);
  EXPECT_EQ(code_of({"model.in_channels=4"}), ErrorCode::config);
  EXPECT_EQ(code_of({"data.split=sideways"}), ErrorCode::config);
  EXPECT_EQ(code_of({"train.epochs=zero"}), ErrorCode::config);
  EXPECT_EQ(cli::exit_code(Error(ErrorCode::config, "x")), 2);
  EXPECT_EQ(cli::exit_code(Error(ErrorCode::missing_prerequisite, "x")), 3);
  EXPECT_EQ(cli::exit_code(Error(ErrorCode::runtime, "x")), 4);
}

TEST(Config, MissingFileIsAConfigError) {
  try {
    cli::load_document(fs::path("/nonexistent/exp.ini"), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(cli::exit_code(e), 2);
  }
}

TEST(Config, CanonicalFormRoundTrips) {
  const auto c = from({"experiment.seed=3", "variant.name=3d-hand", "variant.otsu_scope=per_clip",
                       "model.arch=resnet18_2d_avg", "model.width_multiplier=0.5", "train.lambda=0.3",
                       "eval.cam_class=true", "data.split=subjects", "data.train_subjects=1,2",
                       "data.test_subjects=3"});
  const auto doc = cli::to_document(c);
  const auto back = cli::resolve(doc);
  EXPECT_EQ(kv::dump(cli::to_document(back)), kv::dump(doc));
  EXPECT_EQ(back.variant.options.otsu_scope, ablate::OtsuScope::per_clip);
  EXPECT_TRUE(back.eval.cam_true_class);
  EXPECT_EQ(back.model.arch, net::Arch::resnet18_2d_avg);
}

TEST(Config, ShippedConfigsParse) {
  for (const auto& e : fs::directory_iterator(EHI_SOURCE_DIR "/configs")) {
    if (e.path().extension() != ".ini") continue;
    EXPECT_NO_THROW(cli::resolve(cli::load_document(e.path(), {}))) << e.path();
  }
}

TEST(Config, IdLists) {
  EXPECT_EQ(cli::parse_id_list("3, 1-2 ,7", "x"), (std::set<int>{1, 2, 3, 7}));
  EXPECT_THROW(cli::parse_id_list("4-2", "x"), Error);
  EXPECT_THROW(cli::parse_id_list("a", "x"), Error);
}

// --- partitions ----------------------------------------------------------------

corpus::Manifest small_manifest() {
  corpus::Manifest m;
  int n = 0;
  for (int s = 1; s <= 4; ++s) {
    for (int g = 1; g <= 4; ++g) {
      for (auto p : {corpus::Place::indoor, corpus::Place::outdoor}) {
        m.records.push_back(testing::record("c" + std::to_string(n++), s, g, p));
      }
    }
  }
  return m;
}

TEST(Partitions, PlaceSplit) {
  cli::DataConfig d;
  const auto p = cli::make_partitions(d, small_manifest());
  EXPECT_EQ(p.train.size(), 16u);
  EXPECT_EQ(p.test.size(), 16u);
  for (const auto& r : p.train.records) EXPECT_EQ(r.place, corpus::Place::indoor);
  for (const auto& r : p.test.records) EXPECT_EQ(r.place, corpus::Place::outdoor);
}

TEST(Partitions, SubjectSplitIsDisjoint) {
  cli::DataConfig d;
  d.split = "subjects";
  d.train_subjects = {1, 2};
  d.test_subjects = {3, 4};
  const auto p = cli::make_partitions(d, small_manifest());
  EXPECT_EQ(p.train.size(), 16u);
  EXPECT_EQ(p.test.size(), 16u);
  for (const auto& r : p.test.records) EXPECT_GE(r.subject_id, 3);
  d.test_subjects = {2, 3};
  EXPECT_THROW(cli::make_partitions(d, small_manifest()), Error);
}

TEST(Partitions, EvenGestureTraining) {
  cli::DataConfig d;
  d.train_gestures = "even";
  const auto p = cli::make_partitions(d, small_manifest());
  for (const auto& r : p.train.records) EXPECT_EQ(r.gesture_id % 2, 0);
  EXPECT_EQ(p.seen_gestures, (std::set<int>{2, 4}));
  EXPECT_EQ(p.test.size(), 16u);
}

// --- artifacts -----------------------------------------------------------------

TEST(Artifacts, Sha256KnownVector) {
  testing::TempDir d;
  std::ofstream(d / "abc") << "abc";
  EXPECT_EQ(cli::sha256_file(d / "abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Artifacts, CommitWritesManifestAndLatest) {
  testing::TempDir d;
  cli::ArtifactDir a(d.path(), "train");
  std::ofstream(a.path() / "x.txt") << "abc";
  fs::create_directories(a.path() / "sub");
  std::ofstream(a.path() / "sub" / "y.txt") << "";
  a.commit(cli::to_document(from({})));
  EXPECT_TRUE(fs::exists(a.path() / "config.ini"));
  std::ifstream in(a.path() / "MANIFEST.sha256");
  const std::string text{std::istreambuf_iterator<char>(in), {}};
  EXPECT_NE(text.find("ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad  x.txt"), std::string::npos);
  EXPECT_NE(text.find("sub/y.txt"), std::string::npos);
  EXPECT_LT(text.find("config.ini"), text.find("x.txt"));
  ASSERT_TRUE(cli::latest_dir(d.path(), "train").has_value());
  EXPECT_EQ(fs::canonical(*cli::latest_dir(d.path(), "train")), fs::canonical(a.path()));

  cli::ArtifactDir b(d.path(), "train");
  EXPECT_NE(a.path(), b.path());
  b.commit(cli::to_document(from({})));
  EXPECT_EQ(fs::canonical(*cli::latest_dir(d.path(), "train")), fs::canonical(b.path()));
  EXPECT_FALSE(cli::latest_dir(d.path(), "eval").has_value());
}

// --- the binary ----------------------------------------------------------------

struct Result {
  int rc = -1;
  std::string out;
};

Result sh(const std::string& args) {
  const std::string cmd = std::string(EHI_BINARY) + " -q " + args + " 2>&1";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), p)) r.out += buf.data();
  const int status = pclose(p);
  r.rc = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  const auto nl = s.rfind('\n');
  return nl == std::string::npos ? s : s.substr(nl + 1);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

TEST(Binary, ExitCodes) {
  testing::TempDir d;
  const std::string out = " --output-dir " + d.path().string();
  EXPECT_EQ(sh("train --set train.foo=1" + out).rc, 2);
  EXPECT_EQ(sh("no-such-command").rc, 2);
  EXPECT_EQ(sh("train" + out).rc, 3);  // no synth corpus yet
  EXPECT_EQ(sh("eval" + out).rc, 3);
  EXPECT_EQ(sh("eval --checkpoint /nonexistent.pt --manifest /nonexistent.jsonl" + out).rc, 3);
  // Failed runs leave no artifact directory behind.
  EXPECT_FALSE(cli::latest_dir(d.path(), "train").has_value());
  if (fs::exists(d / "train")) EXPECT_TRUE(fs::is_empty(d / "train"));
}

TEST(Binary, SynthThenAblationSuite) {
  testing::TempDir d;
  const std::string out = " --output-dir " + d.path().string();
  const auto s = sh("synth --preset clean --subjects 2 --gestures 2 --repeats 1" + out);
  ASSERT_EQ(s.rc, 0) << s.out;
  const fs::path synth_dir = trim(s.out);
  EXPECT_TRUE(fs::exists(synth_dir / "corpus" / "manifest.jsonl"));
  EXPECT_TRUE(fs::exists(synth_dir / "MANIFEST.sha256"));

  const auto a = sh("ablation-suite --arch tiny3d --epochs 1 --set model.width_multiplier=0.125 --set train.batch_size=4" + out);
  ASSERT_EQ(a.rc, 0) << a.out;
  const fs::path dir = trim(a.out);
  std::ifstream csv(dir / "ablation.csv");
  std::string line;
  int rows = -1;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 7);
  const auto j = nlohmann::json::parse(slurp(dir / "ablation.json"));
  EXPECT_TRUE(j.is_object() || j.is_array());
}

TEST(Binary, TrainIsReproducible) {
  testing::TempDir d;
  const std::string out = " --output-dir " + d.path().string();
  ASSERT_EQ(sh("synth --subjects 2 --gestures 2 --repeats 1" + out).rc, 0);
  const std::string args =
      "--deterministic train --arch tiny3d --epochs 1 --set model.width_multiplier=0.125 --set train.batch_size=4" + out;
  const auto r1 = sh(args);
  ASSERT_EQ(r1.rc, 0) << r1.out;
  const auto r2 = sh(args);
  ASSERT_EQ(r2.rc, 0) << r2.out;
  const fs::path a = trim(r1.out), b = trim(r2.out);
  ASSERT_NE(a, b);
  EXPECT_EQ(slurp(a / "MANIFEST.sha256"), slurp(b / "MANIFEST.sha256"));
  EXPECT_TRUE(fs::exists(a / "best.pt"));
  EXPECT_TRUE(fs::exists(a / "loss.csv"));

  const auto e = sh("eval" + out);
  ASSERT_EQ(e.rc, 0) << e.out;
  EXPECT_TRUE(fs::exists(fs::path(trim(e.out)) / "summary.json"));
}

}  // namespace
}  // namespace ehi
