#pragma once
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "comcure/curemodel.hpp"
#include "comcure/nelder_mead.hpp"

namespace comcure {

struct EMConfig {
  double tol = 1e-3;  // max relative parameter change between iterations
  int max_iter = 500; // 0 = evaluate at the initializer only (test hook)
  NelderMeadConfig m_step;
};

struct FitResult {
  ParamVector params;
  Dispersion family = Dispersion::poisson();
  double loglik = 0.0;
  double aic = 0.0;
  double bic = 0.0;
  std::size_t n_params = 0;    // p used in AIC/BIC (counts nu only when profiled)
  std::size_t n_subjects = 0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> loglik_trace;  // observed loglik, init first

  bool se_ok = false;  // false when the observed information is not PD
  std::vector<double> se;
  std::vector<std::pair<double, double>> ci95;

  std::vector<double> posteriors;  // susceptibility, one per censored subject
  std::vector<double> cure_probs;  // one per subject

  // (nu, loglik) per grid point when profiled; +infinity encodes bernoulli.
  std::vector<std::pair<double, double>> profile_trace;
};

// Susceptibility posteriors pi_i = 1 - p0_i/S_pop(y_i), one per censored
// subject in data order. Event subjects are excluded (their status is known).
std::vector<double> e_step(std::span<const Subject> data, const ParamVector& params,
                           const ModelSpec& spec);

// Expected complete-data log-likelihood with the censored subjects' latent
// susceptibility replaced by the supplied posteriors.
double q_function(std::span<const Subject> data, const ParamVector& params,
                  std::span<const double> posteriors, const ModelSpec& spec);

// One M-step: maximize the Q-function from start (gammas log-transformed
// inside the optimizer). Never returns a point with lower Q than start.
ParamVector m_step(std::span<const Subject> data, std::span<const double> posteriors,
                   const ParamVector& start, const ModelSpec& spec,
                   const EMConfig& config);

// Full EM fit at a fixed family. Non-convergence is reported through
// converged=false, not an error.
FitResult fit(std::span<const Subject> data, const ModelSpec& spec,
              const ParamVector& init, const EMConfig& config = {});

// Profile likelihood over the spec's family grid: EM fit per grid point
// (warm-started from the previous point's estimates), highest observed
// loglik wins. The dispersion counts as one parameter in AIC/BIC here.
FitResult profile_fit(std::span<const Subject> data, const ModelSpec& spec,
                      const ParamVector& init, const EMConfig& config = {});

// Square roots of the diagonal of the inverted observed information
// (negative central-difference Hessian of the observed log-likelihood).
// Throws when the information matrix is not positive definite.
std::vector<double> standard_errors(std::span<const Subject> data,
                                    const ParamVector& params,
                                    const ModelSpec& spec);

struct LrtResult {
  double lambda = 0.0;
  double p_value = 1.0;  // chi-square(1); asymptotic, boundary-unsafe for
                         // the bernoulli null
  double null_loglik = 0.0;
  double alt_loglik = 0.0;
};

// Lambda = -2(l0 - l), clamped at 0, with l from an already-computed
// (typically profiled) alternative fit and l0 from fitting null_spec.
LrtResult likelihood_ratio(std::span<const Subject> data, const ModelSpec& null_spec,
                           const FitResult& alt, const ParamVector& init,
                           const EMConfig& config = {});

// Upper tail of the chi-square distribution with one degree of freedom.
double chi2_sf_1df(double x);

// AIC = -2l + 2p, BIC = -2l + p log n.
void information_criteria(double loglik, std::size_t p, std::size_t n,
                          double& aic, double& bic);

}  // namespace comcure
