#pragma once

// Sectioned key-value text format shared by generator and experiment configs.
//
//   # comment            (also ';')
//   [section]            section header; a name may repeat to form a list
//   key = value          whitespace around key and value is trimmed
//
// Keys outside any section, malformed lines, and a key repeated inside one
// section are errors reported with their line number.

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ehi::kv {

struct Section {
  std::string name;
  std::vector<std::pair<std::string, std::string>> entries;
  int line = 0;

  const std::string* get(std::string_view key) const;
  void set(std::string_view key, std::string value);
};

struct Document {
  std::vector<Section> sections;

  Section* first(std::string_view name);
  const Section* first(std::string_view name) const;
  std::vector<const Section*> all(std::string_view name) const;
  Section& ensure(std::string_view name);
};

Document parse(std::string_view text, std::string_view origin = "<config>");
Document load(const std::filesystem::path& path);
std::string dump(const Document& doc);

/// Applies `section.key=value` overrides, creating sections/keys as needed.
void apply_override(Document& doc, std::string_view assignment);

/// Typed access that remembers which keys were consumed so leftovers can be
/// rejected as unknown.
class SectionReader {
 public:
  explicit SectionReader(const Section* section, std::string path_prefix = {});

  std::optional<std::string> str(std::string_view key);
  std::string str(std::string_view key, std::string fallback);
  double real(std::string_view key, double fallback);
  long long integer(std::string_view key, long long fallback);
  bool boolean(std::string_view key, bool fallback);
  bool has(std::string_view key) const;

  /// Throws config error naming the first unconsumed key as `section.key`.
  void finish() const;

 private:
  std::string key_path(std::string_view key) const;

  const Section* section_;
  std::string prefix_;
  std::set<std::string, std::less<>> used_;
};

double parse_real(std::string_view text, std::string_view what);
long long parse_integer(std::string_view text, std::string_view what);
bool parse_bool(std::string_view text, std::string_view what);

}  // namespace ehi::kv
