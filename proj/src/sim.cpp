#include "comcure/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace comcure {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

void check_config(const SimConfig& config) {
  if (config.n < 1) throw std::invalid_argument("sim: n must be >= 1");
  if (!(config.censor_rate > 0.0))
    throw std::invalid_argument("sim: censor rate must be positive");
  if (config.subsequent_min < 0 || config.subsequent_max < config.subsequent_min)
    throw std::invalid_argument("sim: subsequent-exposure bounds out of order");
  if (!(config.gap_min > 0.0) || config.gap_max < config.gap_min)
    throw std::invalid_argument("sim: exposure gap bounds out of order");
  if (config.betas.size() != 4)
    throw std::invalid_argument("sim: the generation scheme uses 4 regression "
                                "coefficients (b0,b1 initial; b2,b3 subsequent)");
  if (!(config.weibull_shape > 0.0) || !(config.weibull_scale > 0.0))
    throw std::invalid_argument("sim: weibull truth must be positive");
}

double apply_link(LinkFunction link, double eta) {
  return link == LinkFunction::logistic ? 1.0 / (1.0 + std::exp(-eta))
                                        : std::exp(eta);
}
}  // namespace

LinkConfig sim_link(const SimConfig& config) {
  return LinkConfig::initial_vs_subsequent({"x_imm"}, {"x_prot"}, config.link);
}

ParamVector sim_truth(const SimConfig& config) {
  ParamVector truth;
  truth.betas = config.betas;
  truth.weibull_shape = config.weibull_shape;
  truth.weibull_scale = config.weibull_scale;
  return truth;
}

Subject generate_subject(const SimConfig& config, rng::Engine& eng,
                         std::string id, SimLatent* latent) {
  check_config(config);
  const bool fixed_gap = config.gap_max == config.gap_min;

  int subsequent = rng::uniform_int(eng, config.subsequent_min,
                                    config.subsequent_max);
  std::vector<double> times(static_cast<std::size_t>(subsequent) + 1);
  times[0] = 0.0;
  for (int k = 1; k <= subsequent; ++k) {
    double gap = fixed_gap ? config.gap_min
                           : rng::uniform(eng, config.gap_min, config.gap_max);
    times[k] = times[k - 1] + gap;
  }

  double x_imm = rng::bernoulli(eng, 0.5) ? 1.0 : 0.0;
  double x_prot = rng::bernoulli(eng, 0.5) ? 1.0 : 0.0;
  double theta_initial = apply_link(config.link, config.betas[0] + config.betas[1] * x_imm);
  double theta_subsequent = apply_link(config.link, config.betas[2] + config.betas[3] * x_prot);

  double w = kInf;
  for (int k = 0; k <= subsequent; ++k) {
    double theta = k == 0 ? theta_initial : theta_subsequent;
    int m = sample(theta, config.family, config.series, eng);
    for (int j = 0; j < m; ++j) {
      double z = rng::weibull(eng, config.weibull_shape, config.weibull_scale);
      w = std::min(w, times[k] + z);
    }
  }
  double c = rng::exponential(eng, config.censor_rate);

  Subject s{w == kInf ? c : std::min(w, c),
            w != kInf && w <= c,
            ExposureProfile(std::move(times)),
            {{"x_imm", x_imm}, {"x_prot", x_prot}},
            std::move(id)};
  if (latent) *latent = {w == kInf, w, c};
  return s;
}

std::vector<Subject> generate_dataset(const SimConfig& config, rng::Engine& eng) {
  std::vector<Subject> data;
  data.reserve(config.n);
  for (std::size_t i = 0; i < config.n; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "s%05zu", i + 1);
    data.push_back(generate_subject(config, eng, id));
  }
  return data;
}

ParamVector perturb_init(const ParamVector& truth, double perturbation,
                         rng::Engine& eng) {
  if (!(perturbation >= 0.0 && perturbation < 1.0))
    throw std::invalid_argument("perturbation fraction must lie in [0,1)");
  std::vector<double> flat = truth.flat();
  for (double& v : flat)
    v *= 1.0 + rng::uniform(eng, -perturbation, perturbation);
  return ParamVector::from_flat(flat);
}

namespace {

std::vector<std::string> param_names(std::size_t n_betas, bool with_nu) {
  std::vector<std::string> names;
  for (std::size_t j = 0; j < n_betas; ++j)
    names.push_back("beta" + std::to_string(j));
  names.push_back("gamma1");
  names.push_back("gamma2");
  if (with_nu) names.push_back("nu");
  return names;
}

}  // namespace

SimStudyReport run_fitting_study(const SimConfig& config, const ModelSpec& fit_spec,
                                 const EMConfig& em_config) {
  check_config(config);
  if (config.replicates < 1)
    throw std::invalid_argument("sim: replicates must be >= 1");

  const ParamVector truth = sim_truth(config);
  const std::vector<double> truth_flat = truth.flat();
  const bool profiled = fit_spec.profiled();
  const double truth_nu =
      config.family.is_bernoulli() ? kInf : config.family.nu();
  const std::size_t dim = truth_flat.size();

  std::vector<double> sum_est(dim, 0.0);
  std::vector<double> sum_sq(dim, 0.0);
  std::vector<double> sum_se(dim, 0.0);
  std::vector<int> covered(dim, 0);
  int se_count = 0;
  int successes = 0;
  double sum_nu = 0.0, sum_nu_sq = 0.0;

  for (int rep = 0; rep < config.replicates; ++rep) {
    rng::Engine eng = rng::make_engine(config.seed, static_cast<std::uint64_t>(rep));
    FitResult fit_result;
    try {
      std::vector<Subject> data = generate_dataset(config, eng);
      ParamVector init = perturb_init(truth, config.init_perturbation, eng);
      fit_result = profiled ? profile_fit(data, fit_spec, init, em_config)
                            : fit(data, fit_spec, init, em_config);
    } catch (const std::exception&) {
      continue;  // failed replicate: dropped, counted below
    }
    if (!fit_result.converged || !fit_result.se_ok) continue;

    ++successes;
    std::vector<double> est = fit_result.params.flat();
    if (est.size() != dim)
      throw std::logic_error("fitted parameter count does not match the truth");
    for (std::size_t j = 0; j < dim; ++j) {
      double d = est[j] - truth_flat[j];
      sum_est[j] += est[j];
      sum_sq[j] += d * d;
    }
    ++se_count;
    for (std::size_t j = 0; j < dim; ++j) {
      sum_se[j] += fit_result.se[j];
      if (fit_result.ci95[j].first <= truth_flat[j] &&
          truth_flat[j] <= fit_result.ci95[j].second)
        ++covered[j];
    }
    if (profiled) {
      double nu_hat = fit_result.family.is_bernoulli() ? kInf
                                                       : fit_result.family.nu();
      sum_nu += nu_hat;
      sum_nu_sq += (nu_hat - truth_nu) * (nu_hat - truth_nu);
    }
  }

  SimStudyReport report;
  report.n = config.n;
  report.replicates = config.replicates;
  report.failures = config.replicates - successes;
  report.seed = config.seed;
  report.family_label = config.family.label();
  if (successes == 0) return report;

  std::vector<std::string> names = param_names(truth.betas.size(), profiled);
  for (std::size_t j = 0; j < dim; ++j) {
    ParamSummary s;
    s.name = names[j];
    s.truth = truth_flat[j];
    s.mean_estimate = sum_est[j] / successes;
    s.bias = s.mean_estimate - truth_flat[j];
    s.rmse = std::sqrt(sum_sq[j] / successes);
    s.mean_se = se_count ? sum_se[j] / se_count : 0.0;
    s.coverage = se_count ? static_cast<double>(covered[j]) / se_count : 0.0;
    s.has_se = se_count > 0;
    report.params.push_back(std::move(s));
  }
  if (profiled) {
    ParamSummary s;
    s.name = names.back();
    s.truth = truth_nu;
    s.mean_estimate = sum_nu / successes;
    s.bias = s.mean_estimate - truth_nu;
    s.rmse = std::sqrt(sum_nu_sq / successes);
    s.has_se = false;
    report.params.push_back(std::move(s));
  }
  return report;
}

DiscriminationReport run_discrimination_study(const SimConfig& config,
                                              const std::vector<Dispersion>& families,
                                              double level, int replicates,
                                              const EMConfig& em_config) {
  check_config(config);
  if (families.empty())
    throw std::invalid_argument("discrimination study: empty candidate set");
  if (replicates < 1)
    throw std::invalid_argument("discrimination study: replicates must be >= 1");
  if (!(level > 0.0 && level < 1.0))
    throw std::invalid_argument("discrimination study: level must lie in (0,1)");

  const std::size_t nf = families.size();
  const double threshold = chi2_quantile_1df(level);
  const ParamVector truth = sim_truth(config);

  DiscriminationReport report;
  report.families = families;
  report.replicates = replicates;
  report.level = level;
  report.seed = config.seed;
  report.lrt_rejection.assign(nf * nf, 0.0);
  report.aic_selection.assign(nf * nf, 0.0);
  report.bic_selection.assign(nf * nf, 0.0);
  report.failures.assign(nf, 0);

  std::vector<double> loglik(nf), aic(nf), bic(nf);
  for (std::size_t t = 0; t < nf; ++t) {
    SimConfig gen = config;
    gen.family = families[t];
    int successes = 0;
    for (int rep = 0; rep < replicates; ++rep) {
      rng::Engine eng = rng::make_engine(
          config.seed, ((static_cast<std::uint64_t>(t) + 1) << 32) |
                           static_cast<std::uint64_t>(rep));
      bool ok = true;
      try {
        std::vector<Subject> data = generate_dataset(gen, eng);
        ParamVector init = perturb_init(truth, config.init_perturbation, eng);
        for (std::size_t c = 0; c < nf; ++c) {
          ModelSpec candidate;
          candidate.family = {families[c]};
          candidate.link = sim_link(config);
          candidate.series = config.series;
          FitResult r = fit(data, candidate, init, em_config);
          if (!r.converged) { ok = false; break; }
          loglik[c] = r.loglik;
          aic[c] = r.aic;
          bic[c] = r.bic;
        }
      } catch (const std::exception&) {
        ok = false;
      }
      if (!ok) {
        ++report.failures[t];
        continue;
      }
      ++successes;
      // Profiled alternative = best candidate; each null is one candidate.
      double l_hat = *std::max_element(loglik.begin(), loglik.end());
      for (std::size_t c = 0; c < nf; ++c) {
        double lambda = std::max(0.0, -2.0 * (loglik[c] - l_hat));
        if (lambda > threshold) report.lrt_rejection[c * nf + t] += 1.0;
      }
      std::size_t by_aic = static_cast<std::size_t>(
          std::min_element(aic.begin(), aic.end()) - aic.begin());
      std::size_t by_bic = static_cast<std::size_t>(
          std::min_element(bic.begin(), bic.end()) - bic.begin());
      report.aic_selection[by_aic * nf + t] += 1.0;
      report.bic_selection[by_bic * nf + t] += 1.0;
    }
    if (successes > 0) {
      for (std::size_t c = 0; c < nf; ++c) {
        report.lrt_rejection[c * nf + t] /= successes;
        report.aic_selection[c * nf + t] /= successes;
        report.bic_selection[c * nf + t] /= successes;
      }
    }
  }
  return report;
}

DiscriminationReport run_lrt_study(const SimConfig& config,
                                   const std::vector<Dispersion>& families,
                                   double level, int replicates,
                                   const EMConfig& em_config) {
  return run_discrimination_study(config, families, level, replicates, em_config);
}

DiscriminationReport run_ic_study(const SimConfig& config,
                                  const std::vector<Dispersion>& families,
                                  int replicates, const EMConfig& em_config) {
  return run_discrimination_study(config, families, 0.10, replicates, em_config);
}

double chi2_quantile_1df(double upper_tail) {
  if (!(upper_tail > 0.0 && upper_tail < 1.0))
    throw std::domain_error("chi2_quantile_1df: tail level must lie in (0,1)");
  double lo = 0.0, hi = 200.0;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    if (chi2_sf_1df(mid) > upper_tail)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace comcure
