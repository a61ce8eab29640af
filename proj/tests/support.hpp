#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ehi/corpus.hpp"

namespace ehi::testing {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const noexcept { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

/// Generates a preset corpus into `dir` and returns its manifest.
corpus::Manifest make_corpus(const fs::path& dir, std::string_view preset, int subjects, int gestures, int repeats,
                             std::uint64_t seed = 1);

using Hist = std::array<std::uint64_t, 256>;

/// Exhaustive Otsu threshold in exact integer arithmetic; ties go to the
/// smallest threshold.
int brute_force_otsu(const Hist& h);

/// Dense, sparse, exactly tied and two-bump histograms in equal measure.
Hist random_hist(std::mt19937_64& rng);

/// EER from rates at thresholds between consecutive distinct scores, with
/// the first sign change of FNR - FPR interpolated linearly.
double brute_force_eer(const std::vector<double>& positives, const std::vector<double>& negatives);

corpus::ClipRecord record(std::string id, int subject, int gesture, corpus::Place place, int frames = 1);

}  // namespace ehi::testing
