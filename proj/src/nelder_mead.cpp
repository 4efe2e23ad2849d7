#include "comcure/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace comcure {

NelderMeadResult nelder_mead_maximize(
    const std::function<double(std::span<const double>)>& fn,
    std::span<const double> x0, const NelderMeadConfig& config) {
  const std::size_t d = x0.size();
  NelderMeadResult res;
  res.x.assign(x0.begin(), x0.end());
  if (d == 0) {
    res.f = fn(x0);
    res.evals = 1;
    res.converged = true;
    return res;
  }

  // Minimize -fn internally.
  int evals = 0;
  auto eval = [&](const std::vector<double>& x) {
    ++evals;
    return -fn(x);
  };

  std::vector<std::vector<double>> simplex(d + 1, res.x);
  for (std::size_t i = 0; i < d; ++i) {
    double h = config.step * (x0[i] != 0.0 ? std::abs(x0[i]) : 1.0);
    simplex[i + 1][i] += h;
  }
  std::vector<double> fv(d + 1);
  for (std::size_t i = 0; i <= d; ++i) fv[i] = eval(simplex[i]);

  std::vector<std::size_t> order(d + 1);
  std::vector<double> centroid(d), probe(d);
  bool converged = false;

  while (evals < config.max_evals) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    const std::size_t best = order[0], worst = order[d], second = order[d - 1];

    if (std::isfinite(fv[best]) &&
        fv[worst] - fv[best] < config.f_tol * (1.0 + std::abs(fv[best]))) {
      converged = true;
      break;
    }

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i <= d; ++i) {
      if (i == worst) continue;
      for (std::size_t j = 0; j < d; ++j) centroid[j] += simplex[i][j];
    }
    for (double& c : centroid) c /= static_cast<double>(d);

    auto blend = [&](double coeff) {
      for (std::size_t j = 0; j < d; ++j)
        probe[j] = centroid[j] + coeff * (simplex[worst][j] - centroid[j]);
    };

    blend(-1.0);  // reflection
    double fr = eval(probe);
    if (fr < fv[order[0]]) {
      std::vector<double> reflected = probe;
      blend(-2.0);  // expansion
      double fe = eval(probe);
      if (fe < fr) {
        simplex[worst] = probe;
        fv[worst] = fe;
      } else {
        simplex[worst] = std::move(reflected);
        fv[worst] = fr;
      }
    } else if (fr < fv[second]) {
      simplex[worst] = probe;
      fv[worst] = fr;
    } else {
      bool outside = fr < fv[worst];
      blend(outside ? -0.5 : 0.5);  // contraction
      double fc = eval(probe);
      if (fc < std::min(fr, fv[worst])) {
        simplex[worst] = probe;
        fv[worst] = fc;
      } else {
        // Shrink toward the best vertex.
        for (std::size_t i = 0; i <= d; ++i) {
          if (i == best) continue;
          for (std::size_t j = 0; j < d; ++j)
            simplex[i][j] = simplex[best][j] + 0.5 * (simplex[i][j] - simplex[best][j]);
          fv[i] = eval(simplex[i]);
        }
      }
    }
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i <= d; ++i)
    if (fv[i] < fv[best]) best = i;
  res.x = simplex[best];
  res.f = -fv[best];
  res.evals = evals;
  res.converged = converged;
  return res;
}

}  // namespace comcure
