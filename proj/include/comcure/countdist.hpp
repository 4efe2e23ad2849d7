#pragma once
#include <string>

#include "comcure/rng.hpp"

namespace comcure {

// Dispersion regime of the latent count distribution: either a finite
// shape value nu >= 0, or the limiting regime where the count collapses
// to Bernoulli. The limit is an exact token, never a large-nu stand-in.
class Dispersion {
 public:
  static Dispersion com(double nu);
  static Dispersion poisson() { return com(1.0); }
  static Dispersion geometric() { return com(0.0); }
  static Dispersion bernoulli() {
    Dispersion d;
    d.bernoulli_ = true;
    return d;
  }

  bool is_bernoulli() const { return bernoulli_; }

  // Finite regime only; the limit has no numeric shape.
  double nu() const;

  // "poisson", "geometric", "bernoulli", or "nu=<value>".
  std::string label() const;

  friend bool operator==(const Dispersion&, const Dispersion&) = default;

 private:
  Dispersion() = default;
  double nu_ = 1.0;
  bool bernoulli_ = false;
};

// Truncation control for the infinite series behind the normalizing
// constant. force_series bypasses the closed forms at nu = 0 and 1 so the
// series path can be validated against them.
struct SeriesPolicy {
  double rel_tol = 1e-12;
  int max_terms = 10000;
  bool force_series = false;
};

// Z(theta, nu) = sum_j theta^j / (j!)^nu. Accepts theta = 0 (Z = 1).
// Geometric regime requires theta < 1; violations raise std::domain_error.
double normalizing_constant(double theta, const Dispersion& disp,
                            const SeriesPolicy& policy = {});

// log Z. Preferred in likelihood code: stays finite where Z overflows.
double log_normalizing_constant(double theta, const Dispersion& disp,
                                const SeriesPolicy& policy = {});

// P(M = m) for the count M with parameters (theta, nu).
double pmf(int m, double theta, const Dispersion& disp,
           const SeriesPolicy& policy = {});

// sum_{j>=1} j (theta s)^j / (j!)^nu, the series in the population density
// numerator; s is a survival value in [0, 1]. Returns 0 when theta*s = 0.
double weighted_series(double s, double theta, const Dispersion& disp,
                       const SeriesPolicy& policy = {});

// log of the above; -infinity when theta*s = 0.
double log_weighted_series(double s, double theta, const Dispersion& disp,
                           const SeriesPolicy& policy = {});

// Draw one count by inversion on the cumulative series.
int sample(double theta, const Dispersion& disp, const SeriesPolicy& policy,
           rng::Engine& eng);

}  // namespace comcure
