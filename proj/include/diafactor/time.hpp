#pragma once

#include <cmath>
#include <cstdint>

namespace diafactor {

// All times are held internally as integer milliseconds ("ticks") so that
// interval algebra, scoring and structure durations are exact and testable.
using Ticks = std::int64_t;

constexpr Ticks kTicksPerSecond = 1000;

inline Ticks to_ticks(double seconds) {
  return std::llround(seconds * static_cast<double>(kTicksPerSecond));
}

inline double to_seconds(Ticks t) {
  return static_cast<double>(t) / static_cast<double>(kTicksPerSecond);
}

// Sample index of a tick instant. Exact for sample rates divisible by 1000.
inline std::int64_t tick_to_sample(Ticks t, int sample_rate) {
  return std::llround(static_cast<double>(t) * sample_rate /
                      static_cast<double>(kTicksPerSecond));
}

}  // namespace diafactor
