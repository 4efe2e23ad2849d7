#include "comcure/numdiff.hpp"

#include <cmath>
#include <stdexcept>

namespace comcure {

std::vector<double> central_hessian(
    const std::function<double(std::span<const double>)>& fn,
    std::span<const double> x, std::span<const double> steps) {
  const std::size_t d = x.size();
  if (steps.size() != d)
    throw std::invalid_argument("central_hessian: steps size mismatch");
  std::vector<double> h(d * d, 0.0);
  std::vector<double> p(x.begin(), x.end());
  const double f0 = fn(p);

  for (std::size_t i = 0; i < d; ++i) {
    const double hi = steps[i];
    p[i] = x[i] + hi;
    double fp = fn(p);
    p[i] = x[i] - hi;
    double fm = fn(p);
    p[i] = x[i];
    h[i * d + i] = (fp - 2.0 * f0 + fm) / (hi * hi);
  }

  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i + 1; j < d; ++j) {
      const double hi = steps[i], hj = steps[j];
      p[i] = x[i] + hi; p[j] = x[j] + hj;
      double fpp = fn(p);
      p[j] = x[j] - hj;
      double fpm = fn(p);
      p[i] = x[i] - hi;
      double fmm = fn(p);
      p[j] = x[j] + hj;
      double fmp = fn(p);
      p[i] = x[i]; p[j] = x[j];
      double v = (fpp - fpm - fmp + fmm) / (4.0 * hi * hj);
      h[i * d + j] = v;
      h[j * d + i] = v;
    }
  }
  return h;
}

bool spd_inverse(std::vector<double>& a, std::size_t n) {
  if (a.size() != n * n)
    throw std::invalid_argument("spd_inverse: matrix size mismatch");
  // Cholesky factorization a = L L'.
  std::vector<double> l(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= l[i * n + k] * l[j * n + k];
      if (i == j) {
        if (!(s > 0.0) || !std::isfinite(s)) return false;
        l[i * n + i] = std::sqrt(s);
      } else {
        l[i * n + j] = s / l[j * n + j];
      }
    }
  }
  // Invert L in place (lower triangular).
  for (std::size_t i = 0; i < n; ++i) {
    l[i * n + i] = 1.0 / l[i * n + i];
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = i; k < j; ++k) s -= l[j * n + k] * l[k * n + i];
      l[j * n + i] = s / l[j * n + j];
    }
  }
  // a^{-1} = L^{-T} L^{-1}.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = j; k < n; ++k) s += l[k * n + i] * l[k * n + j];
      a[i * n + j] = s;
      a[j * n + i] = s;
    }
  }
  return true;
}

}  // namespace comcure
