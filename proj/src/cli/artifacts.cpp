#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <memory>
#include <sstream>

#include <openssl/evp.h>

#include "ehi/experiment.hpp"

namespace ehi::cli {

namespace {

std::string utc_stamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorCode::io, "cannot write " + p.string());
}

}  // namespace

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::runtime, "sha256 initialisation failed");
  }
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  std::string hex;
  char byte[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof byte, "%02x", digest[i]);
    hex += byte;
  }
  return hex;
}

ArtifactDir::ArtifactDir(const fs::path& output_dir, std::string_view command)
    : base_(output_dir / std::string(command)) {
  fs::create_directories(base_);
  const std::string stamp = utc_stamp();
  for (int n = 1;; ++n) {
    fs::path candidate = base_ / (n == 1 ? stamp : stamp + "-" + std::to_string(n));
    // create_directory reports false when it already exists; directories are never reused.
    if (fs::create_directory(candidate)) {
      dir_ = candidate;
      break;
    }
  }
}

void ArtifactDir::commit(const kv::Document& resolved_config) {
  write_file(dir_ / "config.ini", kv::dump(resolved_config));

  std::vector<std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir_)) {
    if (!e.is_regular_file()) continue;
    std::string rel = fs::relative(e.path(), dir_).generic_string();
    if (rel != "MANIFEST.sha256") files.push_back(std::move(rel));
  }
  std::sort(files.begin(), files.end());
  std::ostringstream manifest;
  for (const auto& f : files) manifest << sha256_file(dir_ / f) << "  " << f << "\n";
  write_file(dir_ / "MANIFEST.sha256", manifest.str());

  const fs::path link = base_ / "latest";
  std::error_code ec;
  fs::remove(link, ec);
  fs::create_directory_symlink(dir_.filename(), link, ec);
  if (ec) write_file(link, dir_.filename().string() + "\n");  // filesystems without symlinks
}

std::optional<fs::path> latest_dir(const fs::path& output_dir, std::string_view command) {
  const fs::path link = output_dir / std::string(command) / "latest";
  std::error_code ec;
  if (fs::is_symlink(link, ec)) {
    fs::path target = link.parent_path() / fs::read_symlink(link, ec);
    if (!ec && fs::is_directory(target)) return target;
    return std::nullopt;
  }
  if (fs::is_regular_file(link, ec)) {
    std::ifstream in(link);
    std::string name;
    std::getline(in, name);
    fs::path target = link.parent_path() / name;
    if (!name.empty() && fs::is_directory(target)) return target;
  }
  return std::nullopt;
}

}  // namespace ehi::cli
