#include <cstdarg>
#include <cstdio>
#include <string>

#include <spdlog/spdlog.h>

#include "ehi/log.hpp"

namespace ehi::log {
namespace {

std::string vformat(const char* fmt, va_list args) {
  va_list copy;
  va_copy(copy, args);
  const int n = std::vsnprintf(nullptr, 0, fmt, copy);
  va_end(copy);
  std::string out(n > 0 ? static_cast<std::size_t>(n) : 0, '\0');
  if (n > 0) std::vsnprintf(out.data(), out.size() + 1, fmt, args);
  return out;
}

}  // namespace

void set_level(Level level) {
  switch (level) {
    case Level::debug: spdlog::set_level(spdlog::level::debug); break;
    case Level::info: spdlog::set_level(spdlog::level::info); break;
    case Level::warn: spdlog::set_level(spdlog::level::warn); break;
    case Level::error: spdlog::set_level(spdlog::level::err); break;
    case Level::off: spdlog::set_level(spdlog::level::off); break;
  }
}

#define EHI_LOG_FN(name, lvl)               \
  void name(const char* fmt, ...) {         \
    if (!spdlog::should_log(lvl)) return;   \
    va_list args;                           \
    va_start(args, fmt);                    \
    const std::string msg = vformat(fmt, args); \
    va_end(args);                           \
    spdlog::log(lvl, "{}", msg);            \
  }

EHI_LOG_FN(debug, spdlog::level::debug)
EHI_LOG_FN(info, spdlog::level::info)
EHI_LOG_FN(warn, spdlog::level::warn)
EHI_LOG_FN(error, spdlog::level::err)

#undef EHI_LOG_FN

}  // namespace ehi::log
