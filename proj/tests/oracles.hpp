#pragma once
// Independent reference implementations for the tests. These are
// deliberately naive: direct long double summation that shares no code
// (no recurrence tables, no rescaling, no closed forms) with the library,
// so agreement between the two is meaningful evidence.
#include <cmath>
#include <stdexcept>

namespace oracle {

// sum_j theta^j / (j!)^nu in long double. Always takes at least 200
// terms, then keeps going until a term drops below 1e-25 of the sum.
inline long double z_series(long double theta, long double nu) {
  long double sum = 1.0L, term = 1.0L;
  for (int j = 1; j < 200000; ++j) {
    term *= theta / std::pow(static_cast<long double>(j), nu);
    sum += term;
    if (j >= 200 && term < 1e-25L * sum) return sum;
  }
  throw std::runtime_error("oracle: normalizing series did not settle");
}

// sum_{j>=1} j x^j / (j!)^nu with x = theta * s (the density numerator
// series). Returns 0 at x = 0.
inline long double weighted_series(long double x, long double nu) {
  long double sum = 0.0L, term = 1.0L;
  for (int j = 1; j < 200000; ++j) {
    term *= x / std::pow(static_cast<long double>(j), nu);
    sum += j * term;
    if (j >= 200 && j * term < 1e-25L * sum + 1e-4900L) return sum;
  }
  throw std::runtime_error("oracle: weighted series did not settle");
}

// Plain Weibull survival on the shifted clock, written out directly.
inline long double shifted_weibull_survival(long double y, long double t,
                                            long double shape, long double scale) {
  if (y <= t) return 1.0L;
  return std::exp(-std::pow((y - t) / scale, shape));
}

inline double rel_err(double got, long double want) {
  long double denom = std::fabs(want);
  if (denom < 1e-300L) denom = 1e-300L;
  return static_cast<double>(std::fabs(static_cast<long double>(got) - want) / denom);
}

}  // namespace oracle
