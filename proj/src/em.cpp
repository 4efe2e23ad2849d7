#include "comcure/em.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "comcure/numdiff.hpp"

namespace comcure {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_config(const EMConfig& config) {
  if (!(config.tol > 0.0))
    throw std::invalid_argument("em: tol must be positive");
  if (config.max_iter < 0)
    throw std::invalid_argument("em: max_iter must be >= 0");
}

void check_params(const PreparedData& prep, const ParamVector& params) {
  if (params.betas.size() != prep.n_coefficients())
    throw std::invalid_argument(
        "parameter vector has " + std::to_string(params.betas.size()) +
        " coefficients; link config requires " +
        std::to_string(prep.n_coefficients()));
  if (!(params.weibull_shape > 0.0) || !(params.weibull_scale > 0.0))
    throw std::invalid_argument("weibull parameters must be positive");
}

double loglik_prepared(const PreparedData& prep, const ParamVector& params,
                       const Dispersion& family, const SeriesPolicy& policy,
                       EvalScratch& scratch) {
  double sum = 0.0;
  for (const auto& row : prep.rows()) {
    SubjectEval ev = evaluate_subject(prep, row, row.y, params, family, policy,
                                      scratch, row.event);
    if (row.event) {
      if (ev.log_f_pop == -kInf)
        throw std::domain_error("subject " + row.id +
                                ": population density is zero at the observed "
                                "event time");
      sum += ev.log_f_pop;
    } else {
      sum += ev.log_s_pop;
    }
  }
  return sum;
}

std::vector<double> e_step_prepared(const PreparedData& prep,
                                    const ParamVector& params,
                                    const Dispersion& family,
                                    const SeriesPolicy& policy,
                                    EvalScratch& scratch) {
  std::vector<double> post;
  for (const auto& row : prep.rows()) {
    if (row.event) continue;
    SubjectEval ev =
        evaluate_subject(prep, row, row.y, params, family, policy, scratch, false);
    // pi = 1 - p0/S_pop, via the cancellation-free log(S_pop/p0).
    double pi = -std::expm1(-ev.log_s_over_p0);
    post.push_back(std::clamp(pi, 0.0, 1.0));
  }
  return post;
}

double q_prepared(const PreparedData& prep, const ParamVector& params,
                  std::span<const double> posteriors, const Dispersion& family,
                  const SeriesPolicy& policy, EvalScratch& scratch) {
  double q = 0.0;
  std::size_t c = 0;
  for (const auto& row : prep.rows()) {
    SubjectEval ev = evaluate_subject(prep, row, row.y, params, family, policy,
                                      scratch, row.event);
    if (row.event) {
      if (ev.log_f_pop == -kInf)
        throw std::domain_error("q-function: log of zero density at the event "
                                "time of subject " + row.id);
      q += ev.log_f_pop;
    } else {
      double pi = posteriors[c++];
      q += (1.0 - pi) * ev.log_p0;
      // Susceptible term pi * log(S_pop - p0). Below the floor the term is
      // bounded by pi * |log(double min)| ~ 1e-11, so dropping it keeps Q
      // smooth where the candidate's susceptible mass underflows to zero
      // (otherwise a log(0) cliff sits next to the optimum and blocks the
      // M-step for subjects that are all but certainly cured).
      if (pi > 1e-14) {
        double sus = -std::expm1(-ev.log_s_over_p0);
        if (!(sus > 0.0))
          throw std::domain_error(
              "q-function: log of nonpositive argument in the susceptible "
              "term of censored subject " + row.id);
        q += pi * (ev.log_s_pop + std::log(sus));
      }
    }
  }
  return q;
}

std::size_t censored_count(const PreparedData& prep) {
  std::size_t n = 0;
  for (const auto& row : prep.rows())
    if (!row.event) ++n;
  return n;
}

void check_posteriors(const PreparedData& prep, std::span<const double> post) {
  if (post.size() != censored_count(prep))
    throw std::invalid_argument(
        "posterior vector must hold one value per censored subject");
  for (double pi : post)
    if (!(pi >= 0.0 && pi <= 1.0))
      throw std::invalid_argument("posteriors must lie in [0,1]");
}

// Optimizer coordinates: betas as-is, gammas log-transformed.
std::vector<double> to_unconstrained(const ParamVector& p) {
  std::vector<double> x = p.betas;
  x.push_back(std::log(p.weibull_shape));
  x.push_back(std::log(p.weibull_scale));
  return x;
}

ParamVector from_unconstrained(std::span<const double> x) {
  ParamVector p;
  p.betas.assign(x.begin(), x.end() - 2);
  p.weibull_shape = std::exp(x[x.size() - 2]);
  p.weibull_scale = std::exp(x[x.size() - 1]);
  return p;
}

ParamVector m_step_prepared(const PreparedData& prep,
                            std::span<const double> posteriors,
                            const ParamVector& start, const Dispersion& family,
                            const SeriesPolicy& policy, const EMConfig& config,
                            EvalScratch& scratch) {
  auto objective = [&](std::span<const double> x) -> double {
    try {
      return q_prepared(prep, from_unconstrained(x), posteriors, family, policy,
                        scratch);
    } catch (const std::exception&) {
      return -kInf;  // infeasible point (domain error, diverged series, ...)
    }
  };

  std::vector<double> x0 = to_unconstrained(start);
  const double q_start = objective(x0);

  NelderMeadResult best = nelder_mead_maximize(objective, x0, config.m_step);
  if (!best.converged) {
    // One restart from the incumbent with a tighter simplex.
    NelderMeadConfig retry_cfg = config.m_step;
    retry_cfg.step *= 0.5;
    NelderMeadResult retry = nelder_mead_maximize(objective, best.x, retry_cfg);
    if (retry.f >= best.f) best = std::move(retry);
  }
  if (!best.converged && !(best.f > q_start))
    throw std::runtime_error(
        "m-step: no improving point found within the evaluation budget");
  return from_unconstrained(best.x);
}

double relative_change(const ParamVector& a, const ParamVector& b) {
  std::vector<double> fa = a.flat(), fb = b.flat();
  double worst = 0.0;
  for (std::size_t j = 0; j < fa.size(); ++j) {
    double denom = std::max(std::abs(fa[j]), 1e-8);
    worst = std::max(worst, std::abs(fb[j] - fa[j]) / denom);
  }
  return worst;
}

std::vector<double> cure_probs_prepared(const PreparedData& prep,
                                        const ParamVector& params,
                                        const Dispersion& family,
                                        const SeriesPolicy& policy,
                                        EvalScratch& scratch) {
  std::vector<double> out;
  out.reserve(prep.rows().size());
  for (const auto& row : prep.rows()) {
    SubjectEval ev =
        evaluate_subject(prep, row, row.y, params, family, policy, scratch, false);
    out.push_back(std::exp(ev.log_p0));
  }
  return out;
}

}  // namespace

std::vector<double> e_step(std::span<const Subject> data, const ParamVector& params,
                           const ModelSpec& spec) {
  PreparedData prep(data, spec.link);
  check_params(prep, params);
  EvalScratch scratch;
  return e_step_prepared(prep, params, spec.fixed_family(), spec.series, scratch);
}

double q_function(std::span<const Subject> data, const ParamVector& params,
                  std::span<const double> posteriors, const ModelSpec& spec) {
  PreparedData prep(data, spec.link);
  check_params(prep, params);
  check_posteriors(prep, posteriors);
  EvalScratch scratch;
  return q_prepared(prep, params, posteriors, spec.fixed_family(), spec.series,
                    scratch);
}

ParamVector m_step(std::span<const Subject> data, std::span<const double> posteriors,
                   const ParamVector& start, const ModelSpec& spec,
                   const EMConfig& config) {
  check_config(config);
  PreparedData prep(data, spec.link);
  check_params(prep, start);
  check_posteriors(prep, posteriors);
  EvalScratch scratch;
  return m_step_prepared(prep, posteriors, start, spec.fixed_family(), spec.series,
                         config, scratch);
}

FitResult fit(std::span<const Subject> data, const ModelSpec& spec,
              const ParamVector& init, const EMConfig& config) {
  check_config(config);
  const Dispersion& family = spec.fixed_family();
  PreparedData prep(data, spec.link);
  check_params(prep, init);
  EvalScratch scratch;

  FitResult res;
  res.family = family;
  res.params = init;
  res.n_subjects = data.size();
  res.loglik_trace.push_back(
      loglik_prepared(prep, res.params, family, spec.series, scratch));

  int it = 0;
  while (it < config.max_iter) {
    std::vector<double> post =
        e_step_prepared(prep, res.params, family, spec.series, scratch);
    ParamVector next = m_step_prepared(prep, post, res.params, family,
                                       spec.series, config, scratch);
    ++it;
    double delta = relative_change(res.params, next);
    res.params = std::move(next);
    res.loglik_trace.push_back(
        loglik_prepared(prep, res.params, family, spec.series, scratch));
    if (delta < config.tol) {
      res.converged = true;
      break;
    }
  }
  // max_iter = 0 is the evaluate-at-init hook; nothing was asked of EM,
  // so the result is not flagged as a convergence failure.
  if (config.max_iter == 0) res.converged = true;
  res.iterations = it;
  res.loglik = res.loglik_trace.back();
  res.n_params = res.params.size();
  information_criteria(res.loglik, res.n_params, data.size(), res.aic, res.bic);
  res.posteriors = e_step_prepared(prep, res.params, family, spec.series, scratch);
  res.cure_probs =
      cure_probs_prepared(prep, res.params, family, spec.series, scratch);

  try {
    res.se = standard_errors(data, res.params, spec);
    res.se_ok = true;
    std::vector<double> flat = res.params.flat();
    res.ci95.reserve(flat.size());
    for (std::size_t j = 0; j < flat.size(); ++j)
      res.ci95.emplace_back(flat[j] - 1.96 * res.se[j], flat[j] + 1.96 * res.se[j]);
  } catch (const std::exception&) {
    res.se_ok = false;
    res.se.clear();
    res.ci95.clear();
  }
  return res;
}

FitResult profile_fit(std::span<const Subject> data, const ModelSpec& spec,
                      const ParamVector& init, const EMConfig& config) {
  if (spec.family.empty())
    throw std::invalid_argument("profile_fit: the family grid is empty");
  for (std::size_t i = 0; i < spec.family.size(); ++i)
    for (std::size_t j = i + 1; j < spec.family.size(); ++j)
      if (spec.family[i] == spec.family[j])
        throw std::invalid_argument("profile_fit: duplicate grid entry " +
                                    spec.family[i].label());

  FitResult best;
  bool have = false;
  std::vector<std::pair<double, double>> trace;
  ParamVector start = init;
  std::exception_ptr first_error;

  for (const Dispersion& d : spec.family) {
    ModelSpec point = spec;
    point.family = {d};
    try {
      FitResult r = fit(data, point, start, config);
      start = r.params;  // warm start for the next grid point
      double nu_value = d.is_bernoulli() ? kInf : d.nu();
      trace.emplace_back(nu_value, r.loglik);
      if (!have || r.loglik > best.loglik) {
        best = std::move(r);
        have = true;
      }
    } catch (const std::exception&) {
      if (!first_error) first_error = std::current_exception();
    }
  }
  if (!have) std::rethrow_exception(first_error);

  best.profile_trace = std::move(trace);
  if (spec.family.size() > 1) {
    best.n_params = best.params.size() + 1;  // the profiled dispersion
    information_criteria(best.loglik, best.n_params, data.size(), best.aic,
                         best.bic);
  }
  return best;
}

std::vector<double> standard_errors(std::span<const Subject> data,
                                    const ParamVector& params,
                                    const ModelSpec& spec) {
  const Dispersion& family = spec.fixed_family();
  PreparedData prep(data, spec.link);
  check_params(prep, params);
  EvalScratch scratch;

  std::vector<double> x = params.flat();
  auto fn = [&](std::span<const double> v) {
    return loglik_prepared(prep, ParamVector::from_flat(v), family, spec.series,
                           scratch);
  };
  std::vector<double> steps(x.size());
  for (std::size_t j = 0; j < x.size(); ++j)
    steps[j] = 1e-4 * std::max(1.0, std::abs(x[j]));

  std::vector<double> info = central_hessian(fn, x, steps);
  for (double& v : info) v = -v;
  if (!spd_inverse(info, x.size()))
    throw std::runtime_error("observed information matrix is not positive "
                             "definite; standard errors unavailable");
  std::vector<double> se(x.size());
  for (std::size_t j = 0; j < x.size(); ++j)
    se[j] = std::sqrt(info[j * x.size() + j]);
  return se;
}

LrtResult likelihood_ratio(std::span<const Subject> data, const ModelSpec& null_spec,
                           const FitResult& alt, const ParamVector& init,
                           const EMConfig& config) {
  FitResult null_fit = fit(data, null_spec, init, config);
  LrtResult out;
  out.null_loglik = null_fit.loglik;
  out.alt_loglik = alt.loglik;
  out.lambda = std::max(0.0, -2.0 * (null_fit.loglik - alt.loglik));
  out.p_value = chi2_sf_1df(out.lambda);
  return out;
}

double chi2_sf_1df(double x) {
  if (x < 0.0) throw std::domain_error("chi2_sf_1df: negative statistic");
  return std::erfc(std::sqrt(x / 2.0));
}

void information_criteria(double loglik, std::size_t p, std::size_t n,
                          double& aic, double& bic) {
  aic = -2.0 * loglik + 2.0 * static_cast<double>(p);
  bic = -2.0 * loglik +
        static_cast<double>(p) * std::log(static_cast<double>(n));
}

}  // namespace comcure
