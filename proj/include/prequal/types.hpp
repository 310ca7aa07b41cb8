#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace prequal {

// Simulated time has microsecond resolution and starts at zero.
using Duration = std::chrono::microseconds;

struct SimClock {
  using rep = Duration::rep;
  using period = Duration::period;
  using duration = Duration;
  using time_point = std::chrono::time_point<SimClock, Duration>;
  static constexpr bool is_steady = true;
};

using Timestamp = SimClock::time_point;

constexpr Timestamp at(Duration since_start) { return Timestamp{since_start}; }

inline double to_seconds(Duration d) {
  return std::chrono::duration<double>(d).count();
}

inline Duration from_seconds(double s) {
  return std::chrono::duration_cast<Duration>(std::chrono::duration<double>(s));
}

enum class ReplicaId : std::uint32_t {};

constexpr std::size_t index_of(ReplicaId id) {
  return static_cast<std::size_t>(id);
}
constexpr ReplicaId replica(std::size_t i) {
  return static_cast<ReplicaId>(i);
}

// Thrown when an internal invariant is broken. Callers treat this as a bug,
// never as a recoverable condition.
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Thrown for rejected configuration values. The message names the key.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

#define PREQUAL_CHECK(cond, msg)                                            \
  do {                                                                      \
    if (!(cond)) {                                                          \
      throw ::prequal::InvariantViolation(std::string(__FILE__) + ":" +     \
                                          std::to_string(__LINE__) + ": " + \
                                          (msg));                           \
    }                                                                       \
  } while (false)

}  // namespace prequal

template <>
struct std::hash<prequal::ReplicaId> {
  std::size_t operator()(prequal::ReplicaId id) const noexcept {
    return std::hash<std::uint32_t>{}(static_cast<std::uint32_t>(id));
  }
};
