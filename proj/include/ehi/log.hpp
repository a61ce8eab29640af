#pragma once

// printf-style front end to spdlog. Kept out of line so translation units
// that include libtorch (which bundles its own fmt) never see spdlog.

namespace ehi::log {

enum class Level { debug, info, warn, error, off };

void set_level(Level level);
void debug(const char* fmt, ...) __attribute__((format(printf, 1, 2)));
void info(const char* fmt, ...) __attribute__((format(printf, 1, 2)));
void warn(const char* fmt, ...) __attribute__((format(printf, 1, 2)));
void error(const char* fmt, ...) __attribute__((format(printf, 1, 2)));

}  // namespace ehi::log
