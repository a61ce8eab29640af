#pragma once

#include <cstdint>

namespace ehi {

/// BT.601 luma, rounded half-up, computed exactly in integers.
constexpr std::uint8_t luma_bt601(int r, int g, int b) noexcept {
  return static_cast<std::uint8_t>((299 * r + 587 * g + 114 * b + 500) / 1000);
}

}  // namespace ehi
