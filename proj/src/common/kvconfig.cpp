#include "ehi/kvconfig.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "ehi/error.hpp"

namespace ehi::kv {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(std::string_view origin, int line, const std::string& msg) {
  throw Error(ErrorCode::config, std::string(origin) + ":" + std::to_string(line) + ": " + msg);
}

}  // namespace

const std::string* Section::get(std::string_view key) const {
  for (const auto& [k, v] : entries) {
    if (k == key) return &v;
  }
  return nullptr;
}

void Section::set(std::string_view key, std::string value) {
  for (auto& [k, v] : entries) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  entries.emplace_back(std::string(key), std::move(value));
}

Section* Document::first(std::string_view name) {
  for (auto& s : sections) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

const Section* Document::first(std::string_view name) const {
  for (const auto& s : sections) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

std::vector<const Section*> Document::all(std::string_view name) const {
  std::vector<const Section*> out;
  for (const auto& s : sections) {
    if (s.name == name) out.push_back(&s);
  }
  return out;
}

Section& Document::ensure(std::string_view name) {
  if (Section* s = first(name)) return *s;
  sections.push_back(Section{std::string(name), {}, 0});
  return sections.back();
}

Document parse(std::string_view text, std::string_view origin) {
  Document doc;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(origin, line_no, "unterminated section header");
      std::string_view name = trim(line.substr(1, line.size() - 2));
      if (name.empty()) fail(origin, line_no, "empty section name");
      doc.sections.push_back(Section{std::string(name), {}, line_no});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail(origin, line_no, "expected 'key = value'");
    std::string_view key = trim(line.substr(0, eq));
    std::string_view value = trim(line.substr(eq + 1));
    if (key.empty()) fail(origin, line_no, "empty key");
    if (doc.sections.empty()) fail(origin, line_no, "key '" + std::string(key) + "' outside any section");
    Section& sec = doc.sections.back();
    if (sec.get(key) != nullptr) {
      fail(origin, line_no, "duplicate key '" + sec.name + "." + std::string(key) + "'");
    }
    sec.entries.emplace_back(std::string(key), std::string(value));
  }
  return doc;
}

Document load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::missing_prerequisite, "config file not found: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

std::string dump(const Document& doc) {
  std::ostringstream out;
  bool first = true;
  for (const auto& s : doc.sections) {
    if (!first) out << '\n';
    first = false;
    out << '[' << s.name << "]\n";
    for (const auto& [k, v] : s.entries) out << k << " = " << v << '\n';
  }
  return out.str();
}

void apply_override(Document& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw Error(ErrorCode::config, "override '" + std::string(assignment) + "' is not section.key=value");
  }
  std::string_view path = trim(assignment.substr(0, eq));
  std::string_view value = trim(assignment.substr(eq + 1));
  const auto dot = path.find('.');
  if (dot == std::string_view::npos || dot == 0 || dot + 1 == path.size()) {
    throw Error(ErrorCode::config, "override key '" + std::string(path) + "' is not section.key");
  }
  doc.ensure(path.substr(0, dot)).set(path.substr(dot + 1), std::string(value));
}

double parse_real(std::string_view text, std::string_view what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(ErrorCode::config, std::string(what) + ": expected a number, got '" + std::string(text) + "'");
  }
  return v;
}

long long parse_integer(std::string_view text, std::string_view what) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(ErrorCode::config, std::string(what) + ": expected an integer, got '" + std::string(text) + "'");
  }
  return v;
}

bool parse_bool(std::string_view text, std::string_view what) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw Error(ErrorCode::config, std::string(what) + ": expected a boolean, got '" + std::string(text) + "'");
}

SectionReader::SectionReader(const Section* section, std::string path_prefix)
    : section_(section), prefix_(std::move(path_prefix)) {
  if (prefix_.empty() && section_ != nullptr) prefix_ = section_->name;
}

std::string SectionReader::key_path(std::string_view key) const {
  return prefix_ + "." + std::string(key);
}

bool SectionReader::has(std::string_view key) const {
  return section_ != nullptr && section_->get(key) != nullptr;
}

std::optional<std::string> SectionReader::str(std::string_view key) {
  if (section_ == nullptr) return std::nullopt;
  const std::string* v = section_->get(key);
  if (v == nullptr) return std::nullopt;
  used_.emplace(key);
  return *v;
}

std::string SectionReader::str(std::string_view key, std::string fallback) {
  auto v = str(key);
  return v ? *v : std::move(fallback);
}

double SectionReader::real(std::string_view key, double fallback) {
  auto v = str(key);
  return v ? parse_real(*v, key_path(key)) : fallback;
}

long long SectionReader::integer(std::string_view key, long long fallback) {
  auto v = str(key);
  return v ? parse_integer(*v, key_path(key)) : fallback;
}

bool SectionReader::boolean(std::string_view key, bool fallback) {
  auto v = str(key);
  return v ? parse_bool(*v, key_path(key)) : fallback;
}

void SectionReader::finish() const {
  if (section_ == nullptr) return;
  for (const auto& [k, v] : section_->entries) {
    if (!used_.contains(k)) throw Error(ErrorCode::config, "unknown config key '" + key_path(k) + "'");
  }
}

}  // namespace ehi::kv
