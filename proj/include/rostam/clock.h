#pragma once

#include <cstdint>

#include "rostam/error.h"

namespace rostam {

// Seconds since the Unix epoch.
using Timestamp = std::int64_t;

// Simulated wall clock. Never moves backward; advanced explicitly by the
// harness.
class SimClock {
 public:
  static constexpr Timestamp kDefaultStart = 1'700'000'000;

  explicit SimClock(Timestamp start = kDefaultStart) : now_(start) {}

  Timestamp now() const noexcept { return now_; }

  void advance(std::int64_t seconds) {
    if (seconds < 0) {
      throw Error(ErrorCode::kInvalidArgument, "clock cannot move backward");
    }
    now_ += seconds;
  }

 private:
  Timestamp now_;
};

}  // namespace rostam
