#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <string>

namespace dsmelora {

/// Simulation time is kept in integer microseconds so that slot arithmetic is exact.
using Duration = std::chrono::microseconds;

struct SimClock {
  using rep = std::int64_t;
  using period = std::micro;
  using duration = Duration;
  using time_point = std::chrono::time_point<SimClock, Duration>;
  static constexpr bool is_steady = true;
};

using TimePoint = SimClock::time_point;

using NodeId = std::uint32_t;

constexpr TimePoint at(Duration since_origin) { return TimePoint{since_origin}; }

constexpr Duration since_origin(TimePoint t) { return t.time_since_epoch(); }

inline double to_ms(Duration d) { return static_cast<double>(d.count()) / 1000.0; }

inline Duration from_seconds(double s) {
  return Duration{static_cast<std::int64_t>(s * 1e6 + (s >= 0 ? 0.5 : -0.5))};
}

/// Integer microseconds rendered as milliseconds with exactly three decimals.
inline std::string format_ms(Duration d) {
  const std::int64_t us = d.count();
  const std::int64_t mag = us < 0 ? -us : us;
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s%lld.%03lld", us < 0 ? "-" : "",
                static_cast<long long>(mag / 1000), static_cast<long long>(mag % 1000));
  return buf;
}

}  // namespace dsmelora
