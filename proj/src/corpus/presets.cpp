#include <algorithm>

#include "ehi/corpus.hpp"
#include "ehi/error.hpp"

namespace ehi::corpus::presets {

const std::set<int>& verification_train_subjects() {
  static const std::set<int> ids = {3,  4,  5,  6,  8,  10, 15, 16, 17, 20, 21, 22, 23, 25, 26,
                                    27, 30, 32, 36, 38, 39, 40, 42, 43, 44, 45, 46, 48, 49, 50};
  return ids;
}

const std::set<int>& verification_val_subjects() {
  static const std::set<int> ids = {2, 9, 11, 14, 18, 19, 28, 31, 41, 47};
  return ids;
}

const std::set<int>& verification_test_subjects() {
  static const std::set<int> ids = {1, 7, 12, 13, 24, 29, 33, 34, 35, 37};
  return ids;
}

std::pair<Manifest, Manifest> split_outdoor_val_test(const Manifest& outdoor) {
  std::vector<ClipRecord> sorted = outdoor.records;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.clip_id < b.clip_id; });
  // 3,892 of 7,788 outdoor clips are validation; the assignment rule is not
  // published, so the leading clip_id block is used.
  const std::size_t n_val = sorted.size() * 3892 / 7788;
  std::vector<ClipRecord> val(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<ClipRecord> test(sorted.begin() + static_cast<std::ptrdiff_t>(n_val), sorted.end());
  return {outdoor.with_records(std::move(val)), outdoor.with_records(std::move(test))};
}

std::vector<std::string_view> names() { return {place, verification_subjects, even_gestures}; }

std::map<std::string, Manifest> apply(std::string_view name, const Manifest& m) {
  std::map<std::string, Manifest> out;
  if (name == place) {
    auto [train, eval] = split_by_place(m);
    auto [val, test] = split_outdoor_val_test(eval);
    out.emplace("train", std::move(train));
    out.emplace("val", std::move(val));
    out.emplace("test", std::move(test));
  } else if (name == verification_subjects) {
    auto s = split_subjects(m, verification_train_subjects(), verification_val_subjects(),
                            verification_test_subjects());
    out.emplace("train", std::move(s.train));
    out.emplace("val", std::move(s.val));
    out.emplace("test", std::move(s.test));
  } else if (name == even_gestures) {
    auto s = split_gestures_even(m);
    out.emplace("seen", std::move(s.seen));
    out.emplace("unseen", std::move(s.unseen));
  } else {
    throw Error(ErrorCode::config, "unknown split preset '" + std::string(name) + "'");
  }
  return out;
}

}  // namespace ehi::corpus::presets
