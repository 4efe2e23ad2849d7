#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "comcure/curemodel.hpp"
#include "comcure/em.hpp"
#include "comcure/rng.hpp"

namespace comcure {

// Generation recipe for one synthetic cohort: the two-group exposure
// scheme (initial intensity driven by x_imm, subsequent ones by x_prot),
// Weibull promotion times, exponential censoring.
struct SimConfig {
  std::size_t n = 400;
  Dispersion family = Dispersion::poisson();
  std::vector<double> betas = {0.5, -1.0, -3.0, 2.0};  // b0,b1 initial; b2,b3 subsequent
  double weibull_shape = 2.5;
  double weibull_scale = 2.5;
  LinkFunction link = LinkFunction::log_link;
  double censor_rate = 0.10;
  int subsequent_min = 2;   // subsequent-exposure count drawn uniformly
  int subsequent_max = 30;
  double gap_min = 1.0;     // time jump between exposures; equal bounds
  double gap_max = 1.0;     // mean a deterministic jump (no draw consumed)
  double init_perturbation = 0.15;
  std::uint64_t seed = 1;
  int replicates = 200;
  SeriesPolicy series;
};

// The generation scheme's link config (initial vs subsequent groups).
LinkConfig sim_link(const SimConfig& config);

// Truth as a ParamVector laid out for sim_link.
ParamVector sim_truth(const SimConfig& config);

// Latent values exposed for validation: the uncensored event time, the
// censoring draw, and whether every exposure produced zero pathogens.
struct SimLatent {
  bool cured = false;
  double w = 0.0;  // +infinity when cured
  double c = 0.0;
};

// One subject per the generation steps: exposure count and times, the two
// covariates, pathogen counts per exposure, promotion-time minima, and the
// censoring draw, all from the supplied engine in that fixed order.
Subject generate_subject(const SimConfig& config, rng::Engine& eng,
                         std::string id = "", SimLatent* latent = nullptr);

std::vector<Subject> generate_dataset(const SimConfig& config, rng::Engine& eng);

// Truth multiplied per coordinate by (1 + U(-p, p)) with p the configured
// perturbation; the studies' standard initializer.
ParamVector perturb_init(const ParamVector& truth, double perturbation,
                         rng::Engine& eng);

struct ParamSummary {
  std::string name;
  double truth = 0.0;
  double mean_estimate = 0.0;
  double mean_se = 0.0;
  double bias = 0.0;
  double rmse = 0.0;
  double coverage = 0.0;
  bool has_se = true;  // false for the profiled dispersion row
};

struct SimStudyReport {
  std::vector<ParamSummary> params;
  std::size_t n = 0;
  int replicates = 0;
  int failures = 0;  // thrown, non-converged, or singular-information fits
  std::uint64_t seed = 0;
  std::string family_label;
};

// Repeated generate/perturb/fit cycles aggregated into bias, mean SE,
// RMSE, and 95% coverage per parameter. fit_spec with a family grid runs
// the profile fit and adds a dispersion row. Replicate k's data depends
// only on (config.seed, k).
SimStudyReport run_fitting_study(const SimConfig& config, const ModelSpec& fit_spec,
                                 const EMConfig& em_config);

// Model-discrimination sweep over candidate families: per (true family,
// replicate), one dataset is generated and every candidate is fitted once;
// LRT rejections (against the grid-profiled alternative) and AIC/BIC
// selections are derived from the same maximized logliks.
struct DiscriminationReport {
  std::vector<Dispersion> families;  // candidate set = true-model axis
  int replicates = 0;
  double level = 0.10;
  // Row-major [fitted/selected][true]; denominators exclude failures.
  std::vector<double> lrt_rejection;
  std::vector<double> aic_selection;
  std::vector<double> bic_selection;
  std::vector<int> failures;  // per true family
  std::uint64_t seed = 0;
};

DiscriminationReport run_discrimination_study(const SimConfig& config,
                                              const std::vector<Dispersion>& families,
                                              double level, int replicates,
                                              const EMConfig& em_config);

// Single-purpose views over the shared sweep.
DiscriminationReport run_lrt_study(const SimConfig& config,
                                   const std::vector<Dispersion>& families,
                                   double level = 0.10, int replicates = 200,
                                   const EMConfig& em_config = {});
DiscriminationReport run_ic_study(const SimConfig& config,
                                  const std::vector<Dispersion>& families,
                                  int replicates = 200,
                                  const EMConfig& em_config = {});

// Upper chi-square(1) quantile for a given tail level, by bisection on the
// survival function.
double chi2_quantile_1df(double upper_tail);

}  // namespace comcure
