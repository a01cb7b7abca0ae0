#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>

namespace risdcf {

// Simulation clock. Integer nanoseconds keep event ties exact; every default
// airtime is a whole number of microseconds.
using SimTime = std::chrono::duration<std::int64_t, std::nano>;

inline SimTime from_us(double us) { return SimTime{std::llround(us * 1000.0)}; }

inline double to_us(SimTime t) { return static_cast<double>(t.count()) / 1000.0; }

}  // namespace risdcf
