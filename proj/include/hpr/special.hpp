#pragma once

#include <cstdint>

namespace hpr {

/// log(n!) for n >= 0. Exact cumulative sum of log(i) below 10^4, Stirling
/// series with three correction terms above (absolute error < 1e-15 there).
double log_factorial(std::int64_t n);

/// Principal branch of Lambert W evaluated from log(z), for z > 0. Works for
/// arguments far outside double range (log_z up to ~1e300).
double lambert_w_from_log(double log_z);

}  // namespace hpr
