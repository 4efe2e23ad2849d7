#pragma once
#include <functional>
#include <span>
#include <vector>

namespace comcure {

struct NelderMeadConfig {
  double step = 0.1;      // initial simplex edge, relative to |x0_i| (abs if 0)
  int max_evals = 2000;
  double f_tol = 1e-8;    // stop when the simplex f-spread < f_tol*(1+|f_best|)
};

struct NelderMeadResult {
  std::vector<double> x;
  double f = 0.0;
  int evals = 0;
  bool converged = false;
};

// Derivative-free simplex maximization (reflection/expansion/contraction/
// shrink). The start point is always a simplex vertex, so the result is
// never worse than the start.
NelderMeadResult nelder_mead_maximize(
    const std::function<double(std::span<const double>)>& fn,
    std::span<const double> x0, const NelderMeadConfig& config = {});

}  // namespace comcure
