#include "comcure/countdist.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace comcure {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Rescale running sums before they can overflow: with theta capped at
// 1e80 a single term grows by at most that factor per step, so 1e200
// leaves headroom.
constexpr double kRescaleAt = 1e200;
constexpr double kRescaleFactor = 0x1p-512;
const double kRescaleLog = 512.0 * std::numbers::ln2;

constexpr double kThetaMax = 1e80;

void check_theta(double theta) {
  if (!(theta >= 0.0))
    throw std::domain_error("count distribution: theta must be >= 0, got " +
                            std::to_string(theta));
  if (theta > kThetaMax)
    throw std::domain_error(
        "count distribution: theta too large for series evaluation: " +
        std::to_string(theta));
}

// Table of j^{-nu} for the term recurrence, grown on demand and keyed by
// the exact nu bits. thread_local: evaluation loops hit this hard.
struct PowTable {
  double nu = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> inv_pow;  // inv_pow[j-1] = j^{-nu}

  const double* ensure(double nu_now, std::size_t n) {
    if (nu_now != nu) {
      nu = nu_now;
      inv_pow.clear();
    }
    if (n > inv_pow.size()) {
      std::size_t cap = 64;
      while (cap < n) cap *= 2;
      std::size_t old = inv_pow.size();
      inv_pow.resize(cap);
      for (std::size_t j = old; j < cap; ++j)
        inv_pow[j] = std::pow(static_cast<double>(j + 1), -nu);
    }
    return inv_pow.data();
  }
};
thread_local PowTable g_pow_table;

[[noreturn]] void throw_no_convergence(const char* what, double theta, double nu,
                                       int max_terms) {
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "%s did not converge within %d terms (theta=%g, nu=%g)", what,
                max_terms, theta, nu);
  throw std::runtime_error(buf);
}

// log of sum_j theta^j/(j!)^nu by forward recurrence with rescaling.
// Stops once the next term would fall below rel_tol of the running sum;
// in the decaying tail that bounds the truncation error by about rel_tol.
double log_z_series(double theta, double nu, const SeriesPolicy& policy) {
  if (theta == 0.0) return 0.0;
  const double* ipow = g_pow_table.ensure(nu, 64);
  double sum = 1.0, term = 1.0, log_shift = 0.0;
  for (int j = 1; j <= policy.max_terms; ++j) {
    if (static_cast<std::size_t>(j) + 1 > g_pow_table.inv_pow.size())
      ipow = g_pow_table.ensure(nu, static_cast<std::size_t>(j) + 64);
    term *= theta * ipow[j - 1];
    sum += term;
    if (sum > kRescaleAt) {
      sum *= kRescaleFactor;
      term *= kRescaleFactor;
      log_shift += kRescaleLog;
    }
    if (term * theta * ipow[j] < policy.rel_tol * sum)
      return std::log(sum) + log_shift;
  }
  throw_no_convergence("normalizing constant series", theta, nu,
                       policy.max_terms);
}

// log of sum_{j>=1} j x^j/(j!)^nu where x = theta*s. Same recurrence on
// the unweighted term u_j = x^j/(j!)^nu, accumulating j*u_j.
double log_weighted_sum_series(double x, double nu, const SeriesPolicy& policy) {
  const double* ipow = g_pow_table.ensure(nu, 64);
  double u = x, sum = x, log_shift = 0.0;
  for (int j = 1; j <= policy.max_terms; ++j) {
    if (static_cast<std::size_t>(j) + 1 > g_pow_table.inv_pow.size())
      ipow = g_pow_table.ensure(nu, static_cast<std::size_t>(j) + 64);
    double u_next = u * x * ipow[j];  // x^{j+1}/((j+1)!)^nu
    if ((j + 1) * u_next < policy.rel_tol * sum)
      return std::log(sum) + log_shift;
    u = u_next;
    sum += (j + 1) * u;
    if (sum > kRescaleAt) {
      sum *= kRescaleFactor;
      u *= kRescaleFactor;
      log_shift += kRescaleLog;
    }
  }
  throw_no_convergence("weighted series", x, nu, policy.max_terms);
}

void check_geometric_theta(double theta) {
  if (theta >= 1.0)
    throw std::domain_error(
        "geometric regime (nu=0) requires theta < 1 for the series to "
        "converge, got theta=" +
        std::to_string(theta));
}

}  // namespace

Dispersion Dispersion::com(double nu) {
  if (!(nu >= 0.0) || !std::isfinite(nu))
    throw std::invalid_argument("dispersion shape must be finite and >= 0, got " +
                                std::to_string(nu));
  Dispersion d;
  d.nu_ = nu;
  return d;
}

double Dispersion::nu() const {
  if (bernoulli_)
    throw std::logic_error("nu() is undefined in the bernoulli limit regime");
  return nu_;
}

std::string Dispersion::label() const {
  if (bernoulli_) return "bernoulli";
  if (nu_ == 1.0) return "poisson";
  if (nu_ == 0.0) return "geometric";
  char buf[32];
  std::snprintf(buf, sizeof buf, "nu=%g", nu_);
  return buf;
}

double log_normalizing_constant(double theta, const Dispersion& disp,
                                const SeriesPolicy& policy) {
  check_theta(theta);
  if (disp.is_bernoulli()) return std::log1p(theta);
  double nu = disp.nu();
  if (nu == 0.0) {
    check_geometric_theta(theta);
    if (!policy.force_series) return -std::log1p(-theta);
  } else if (nu == 1.0 && !policy.force_series) {
    return theta;
  }
  return log_z_series(theta, nu, policy);
}

double normalizing_constant(double theta, const Dispersion& disp,
                            const SeriesPolicy& policy) {
  return std::exp(log_normalizing_constant(theta, disp, policy));
}

double pmf(int m, double theta, const Dispersion& disp,
           const SeriesPolicy& policy) {
  if (m < 0) throw std::invalid_argument("pmf: count must be >= 0");
  check_theta(theta);
  if (disp.is_bernoulli()) {
    if (m == 0) return 1.0 / (1.0 + theta);
    if (m == 1) return theta / (1.0 + theta);
    return 0.0;
  }
  double log_z = log_normalizing_constant(theta, disp, policy);
  if (m == 0) return std::exp(-log_z);
  if (theta == 0.0) return 0.0;
  double log_p =
      m * std::log(theta) - disp.nu() * std::lgamma(m + 1.0) - log_z;
  return std::exp(log_p);
}

double log_weighted_series(double s, double theta, const Dispersion& disp,
                           const SeriesPolicy& policy) {
  if (!(s >= 0.0 && s <= 1.0))
    throw std::domain_error("weighted series: s must lie in [0,1], got " +
                            std::to_string(s));
  check_theta(theta);
  double x = theta * s;
  if (x == 0.0) return -kInf;
  if (disp.is_bernoulli()) return std::log(x);
  double nu = disp.nu();
  if (!policy.force_series) {
    if (nu == 1.0) return std::log(x) + x;  // x e^x
    if (nu == 0.0) {
      check_geometric_theta(theta);
      return std::log(x) - 2.0 * std::log1p(-x);  // x/(1-x)^2
    }
  }
  if (nu == 0.0) check_geometric_theta(theta);
  return log_weighted_sum_series(x, nu, policy);
}

double weighted_series(double s, double theta, const Dispersion& disp,
                       const SeriesPolicy& policy) {
  double lw = log_weighted_series(s, theta, disp, policy);
  return lw == -kInf ? 0.0 : std::exp(lw);
}

int sample(double theta, const Dispersion& disp, const SeriesPolicy& policy,
           rng::Engine& eng) {
  check_theta(theta);
  double u = rng::uniform01(eng);
  if (disp.is_bernoulli()) return u * (1.0 + theta) < 1.0 ? 0 : 1;
  double nu = disp.nu();
  if (nu == 0.0) check_geometric_theta(theta);
  double log_z = log_normalizing_constant(theta, disp, policy);
  if (log_z > 690.0)
    throw std::runtime_error(
        "count sampling: normalizing constant overflows double (theta=" +
        std::to_string(theta) + ", " + disp.label() + ")");
  const double target = u * std::exp(log_z);
  const double* ipow = g_pow_table.ensure(nu, 64);
  double cum = 1.0, term = 1.0;
  for (int m = 0; m <= policy.max_terms; ++m) {
    if (cum >= target) return m;
    if (static_cast<std::size_t>(m) + 1 > g_pow_table.inv_pow.size())
      ipow = g_pow_table.ensure(nu, static_cast<std::size_t>(m) + 64);
    term *= theta * ipow[m];
    cum += term;
  }
  throw_no_convergence("count inversion sampling", theta, nu, policy.max_terms);
}

}  // namespace comcure
