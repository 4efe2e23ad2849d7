#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "comcure/em.hpp"
#include "comcure/sim.hpp"

using namespace comcure;

namespace {

Subject make_subject(double y, bool event, std::vector<double> times,
                     std::string id) {
  return Subject{y, event, ExposureProfile(std::move(times)), {}, std::move(id)};
}

ModelSpec two_group_spec(Dispersion family,
                         LinkFunction link = LinkFunction::log_link) {
  ModelSpec spec;
  spec.family = {family};
  spec.link = LinkConfig::initial_vs_subsequent({}, {}, link);
  return spec;
}

// A small cohort from the generator, cheap enough for repeated fits.
std::vector<Subject> small_cohort(std::uint64_t seed, std::size_t n,
                                  LinkFunction link = LinkFunction::log_link) {
  SimConfig cfg;
  cfg.n = n;
  cfg.link = link;
  cfg.subsequent_min = 1;
  cfg.subsequent_max = 4;
  cfg.seed = seed;
  rng::Engine eng = rng::make_engine(seed, 0);
  return generate_dataset(cfg, eng);
}

ModelSpec sim_spec(Dispersion family, LinkFunction link = LinkFunction::log_link) {
  SimConfig cfg;
  cfg.link = link;
  ModelSpec spec;
  spec.family = {family};
  spec.link = sim_link(cfg);
  return spec;
}

ParamVector sim_start() {
  ParamVector p;
  p.betas = {0.4, -0.8, -2.6, 1.7};
  p.weibull_shape = 2.2;
  p.weibull_scale = 2.8;
  return p;
}

// Central-difference gradient with per-coordinate relative steps.
std::vector<double> fd_gradient(const std::function<double(const ParamVector&)>& f,
                                const ParamVector& at) {
  std::vector<double> x = at.flat();
  std::vector<double> g(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    double h = 1e-5 * std::max(1.0, std::fabs(x[j]));
    std::vector<double> xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    g[j] = (f(ParamVector::from_flat(xp)) - f(ParamVector::from_flat(xm))) /
           (2.0 * h);
  }
  return g;
}

}  // namespace

TEST_CASE("posterior susceptibility matches the closed poisson formula") {
  std::vector<Subject> data;
  data.push_back(make_subject(2.0, false, {0.0, 1.0}, "c1"));
  data.push_back(make_subject(1.3, true, {0.0}, "e1"));
  data.push_back(make_subject(3.5, false, {0.0, 1.0, 2.0}, "c2"));

  ParamVector p;
  p.betas = {std::log(0.9), std::log(0.4)};
  p.weibull_shape = 2.0;
  p.weibull_scale = 1.5;
  ModelSpec spec = two_group_spec(Dispersion::poisson());

  std::vector<double> post = e_step(data, p, spec);
  REQUIRE(post.size() == 2);  // events carry no latency

  Weibull w(2.0, 1.5);
  // pi = 1 - p0/S_pop with S_pop = exp(-sum_k theta_k F_k(y)).
  double s1v = std::exp(-(0.9 * w.shifted_cdf(2.0, 0.0) + 0.4 * w.shifted_cdf(2.0, 1.0)));
  double p01 = std::exp(-1.3);
  CHECK(post[0] == doctest::Approx(1.0 - p01 / s1v).epsilon(1e-12));

  double s2v = std::exp(-(0.9 * w.shifted_cdf(3.5, 0.0) + 0.4 * w.shifted_cdf(3.5, 1.0) +
                          0.4 * w.shifted_cdf(3.5, 2.0)));
  double p02 = std::exp(-(0.9 + 0.4 + 0.4));
  CHECK(post[1] == doctest::Approx(1.0 - p02 / s2v).epsilon(1e-12));

  for (double pi : post) {
    CHECK(pi >= 0.0);
    CHECK(pi <= 1.0);
  }
}

TEST_CASE("q function assembles the expected complete-data loglik") {
  std::vector<Subject> data;
  data.push_back(make_subject(1.2, true, {0.0}, "e1"));
  data.push_back(make_subject(2.5, false, {0.0, 1.0}, "c1"));

  ParamVector p;
  p.betas = {std::log(1.1), std::log(0.5)};
  p.weibull_shape = 1.8;
  p.weibull_scale = 2.0;
  ModelSpec spec = two_group_spec(Dispersion::com(2.0));

  std::vector<double> post = {0.37};
  double p0 = cure_rate(data[1], p, spec);
  double sp = s_pop(2.5, data[1], p, spec);
  double manual = std::log(f_pop(1.2, data[0], p, spec)) +
                  (1.0 - 0.37) * std::log(p0) + 0.37 * std::log(sp - p0);
  CHECK(q_function(data, p, post, spec) == doctest::Approx(manual).epsilon(1e-11));

  // A fully-resolved censored subject contributes only the cured term.
  std::vector<double> cured = {0.0};
  double manual0 = std::log(f_pop(1.2, data[0], p, spec)) + std::log(p0);
  CHECK(q_function(data, p, cured, spec) == doctest::Approx(manual0).epsilon(1e-12));

  CHECK_THROWS_AS(q_function(data, p, std::vector<double>{0.2, 0.4}, spec),
                  std::invalid_argument);
  CHECK_THROWS_AS(q_function(data, p, std::vector<double>{1.4}, spec),
                  std::invalid_argument);
}

TEST_CASE("q gradient equals the observed loglik gradient at the expansion point") {
  // The defining property of the E-step posteriors: at the point where Q
  // was assembled, both surfaces share their gradient. A regression here
  // means the EM would stall short of the MLE.
  struct Case {
    Dispersion family;
    LinkFunction link;
  };
  const Case cases[] = {{Dispersion::poisson(), LinkFunction::log_link},
                        {Dispersion::com(2.0), LinkFunction::log_link},
                        {Dispersion::bernoulli(), LinkFunction::log_link},
                        {Dispersion::geometric(), LinkFunction::logistic}};
  for (const auto& c : cases) {
    CAPTURE(c.family.label());
    std::vector<Subject> data = small_cohort(91, 40, c.link);
    ModelSpec spec = sim_spec(c.family, c.link);
    ParamVector at = sim_start();

    std::vector<double> post = e_step(data, at, spec);
    auto q = [&](const ParamVector& p) { return q_function(data, p, post, spec); };
    auto l = [&](const ParamVector& p) { return observed_loglik(data, p, spec); };
    std::vector<double> gq = fd_gradient(q, at);
    std::vector<double> gl = fd_gradient(l, at);
    for (std::size_t j = 0; j < gq.size(); ++j) {
      CAPTURE(j);
      CHECK(std::fabs(gq[j] - gl[j]) < 1e-4 * std::max(1.0, std::fabs(gl[j])));
    }
  }
}

TEST_CASE("m step does not decrease q") {
  std::vector<Subject> data = small_cohort(17, 50);
  ModelSpec spec = sim_spec(Dispersion::poisson());
  ParamVector start = sim_start();
  start.betas[0] += 0.6;  // push it off the ridge
  start.weibull_scale *= 1.4;

  std::vector<double> post = e_step(data, start, spec);
  ParamVector next = m_step(data, post, start, spec, {});
  CHECK(q_function(data, next, post, spec) >=
        q_function(data, start, post, spec) - 1e-10);
}

TEST_CASE("em fit climbs monotonically and reports consistently") {
  std::vector<Subject> data = small_cohort(5, 80);
  ModelSpec spec = sim_spec(Dispersion::poisson());
  FitResult res = fit(data, spec, sim_start());

  CHECK(res.converged);
  CHECK(res.iterations >= 1);
  REQUIRE(res.loglik_trace.size() >= 2);
  for (std::size_t k = 1; k < res.loglik_trace.size(); ++k)
    CHECK(res.loglik_trace[k] >= res.loglik_trace[k - 1] - 1e-8);
  CHECK(res.loglik == doctest::Approx(res.loglik_trace.back()).epsilon(1e-12));
  CHECK(res.loglik ==
        doctest::Approx(observed_loglik(data, res.params, spec)).epsilon(1e-12));

  CHECK(res.n_subjects == data.size());
  CHECK(res.n_params == res.params.betas.size() + 2);
  double aic = 0.0, bic = 0.0;
  information_criteria(res.loglik, res.n_params, res.n_subjects, aic, bic);
  CHECK(res.aic == doctest::Approx(aic).epsilon(1e-14));
  CHECK(res.bic == doctest::Approx(bic).epsilon(1e-14));

  std::size_t censored = 0;
  for (const Subject& s : data)
    if (!s.event) ++censored;
  CHECK(res.posteriors.size() == censored);
  CHECK(res.cure_probs.size() == data.size());
  for (double c : res.cure_probs) {
    CHECK(c > 0.0);
    CHECK(c < 1.0);
  }

  REQUIRE(res.se_ok);
  REQUIRE(res.se.size() == res.params.size());
  for (std::size_t j = 0; j < res.se.size(); ++j) {
    CHECK(res.se[j] > 0.0);
    double est = res.params.flat()[j];
    CHECK(res.ci95[j].first ==
          doctest::Approx(est - 1.96 * res.se[j]).epsilon(1e-12));
    CHECK(res.ci95[j].second ==
          doctest::Approx(est + 1.96 * res.se[j]).epsilon(1e-12));
  }
}

TEST_CASE("max_iter = 0 evaluates the initializer without moving") {
  std::vector<Subject> data = small_cohort(5, 30);
  ModelSpec spec = sim_spec(Dispersion::poisson());
  ParamVector init = sim_start();
  EMConfig cfg;
  cfg.max_iter = 0;
  FitResult res = fit(data, spec, init, cfg);

  CHECK(res.converged);
  CHECK(res.iterations == 0);
  CHECK(res.params.flat() == init.flat());
  CHECK(res.loglik ==
        doctest::Approx(observed_loglik(data, init, spec)).epsilon(1e-14));
  CHECK(res.loglik_trace.size() == 1);
}

TEST_CASE("em config validation") {
  std::vector<Subject> data = small_cohort(5, 10);
  ModelSpec spec = sim_spec(Dispersion::poisson());
  EMConfig bad_tol;
  bad_tol.tol = 0.0;
  CHECK_THROWS_AS(fit(data, spec, sim_start(), bad_tol), std::invalid_argument);
  EMConfig bad_iter;
  bad_iter.max_iter = -1;
  CHECK_THROWS_AS(fit(data, spec, sim_start(), bad_iter), std::invalid_argument);
  ParamVector bad_gamma = sim_start();
  bad_gamma.weibull_shape = -1.0;
  CHECK_THROWS_AS(fit(data, spec, bad_gamma, {}), std::invalid_argument);
}

TEST_CASE("profile fit scans the grid and keeps the best point") {
  std::vector<Subject> data = small_cohort(23, 70);
  ModelSpec grid = sim_spec(Dispersion::poisson());
  grid.family = {Dispersion::com(0.5), Dispersion::com(1.0), Dispersion::com(2.0)};
  ParamVector init = sim_start();

  FitResult prof = profile_fit(data, grid, init);
  REQUIRE(prof.profile_trace.size() == 3);
  double best = prof.profile_trace[0].second;
  for (const auto& [nu, l] : prof.profile_trace) {
    CHECK(std::isfinite(l));
    best = std::max(best, l);
  }
  CHECK(prof.loglik == doctest::Approx(best).epsilon(1e-14));
  CHECK(prof.converged);
  // The dispersion counts as an estimated parameter on a grid.
  CHECK(prof.n_params == prof.params.betas.size() + 3);

  // Warm-started chain must do at least as well as a cold fit of the
  // winning family (the historical failure mode was the reverse).
  ModelSpec fixed = sim_spec(prof.family);
  FitResult direct = fit(data, fixed, init);
  CHECK(prof.loglik >= direct.loglik - 1e-4);

  ModelSpec empty = grid;
  empty.family = {};
  CHECK_THROWS_AS(profile_fit(data, empty, init), std::invalid_argument);
  ModelSpec dup = grid;
  dup.family = {Dispersion::poisson(), Dispersion::poisson()};
  CHECK_THROWS_AS(profile_fit(data, dup, init), std::invalid_argument);
}

TEST_CASE("profile fit encodes the bernoulli limit as an infinite grid point") {
  std::vector<Subject> data = small_cohort(29, 50);
  ModelSpec grid = sim_spec(Dispersion::poisson());
  grid.family = {Dispersion::com(1.0), Dispersion::bernoulli()};
  FitResult prof = profile_fit(data, grid, sim_start());
  REQUIRE(prof.profile_trace.size() == 2);
  CHECK(prof.profile_trace[0].first == 1.0);
  CHECK(std::isinf(prof.profile_trace[1].first));
}

TEST_CASE("standard errors reject a singular information matrix") {
  // Two identical censored subjects cannot identify five parameters.
  std::vector<Subject> data;
  data.push_back(make_subject(2.0, false, {0.0, 1.0}, "c1"));
  data.push_back(make_subject(2.0, false, {0.0, 1.0}, "c2"));
  ModelSpec spec = two_group_spec(Dispersion::poisson());
  ParamVector p;
  p.betas = {-0.5, -1.0};
  p.weibull_shape = 1.5;
  p.weibull_scale = 2.0;
  CHECK_THROWS_AS(standard_errors(data, p, spec), std::runtime_error);
}

TEST_CASE("likelihood ratio of a model against itself is null") {
  std::vector<Subject> data = small_cohort(31, 40);
  ModelSpec spec = sim_spec(Dispersion::poisson());
  ParamVector init = sim_start();
  FitResult alt = fit(data, spec, init);

  LrtResult lrt = likelihood_ratio(data, spec, alt, init);
  CHECK(lrt.lambda == 0.0);  // identical deterministic fits
  CHECK(lrt.p_value == 1.0);
  CHECK(lrt.null_loglik == doctest::Approx(alt.loglik).epsilon(1e-14));
  CHECK(lrt.alt_loglik == alt.loglik);
}

TEST_CASE("likelihood ratio against a profiled alternative") {
  std::vector<Subject> data = small_cohort(37, 50);
  ModelSpec grid = sim_spec(Dispersion::poisson());
  grid.family = {Dispersion::com(1.0), Dispersion::com(2.0)};
  ParamVector init = sim_start();
  FitResult alt = profile_fit(data, grid, init);

  ModelSpec null_spec = sim_spec(Dispersion::com(2.0));
  LrtResult lrt = likelihood_ratio(data, null_spec, alt, init);
  CHECK(lrt.lambda >= 0.0);
  CHECK(lrt.p_value >= 0.0);
  CHECK(lrt.p_value <= 1.0);
  CHECK(lrt.alt_loglik >= lrt.null_loglik - 1e-8);
  CHECK(lrt.p_value ==
        doctest::Approx(chi2_sf_1df(lrt.lambda)).epsilon(1e-14));
}

TEST_CASE("chi-square survival function reference values") {
  CHECK(chi2_sf_1df(0.0) == 1.0);
  CHECK(chi2_sf_1df(3.841458820694124) == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(chi2_sf_1df(2.705543454095404) == doctest::Approx(0.10).epsilon(1e-9));
  CHECK(chi2_sf_1df(6.634896601021213) == doctest::Approx(0.01).epsilon(1e-9));
  CHECK_THROWS_AS(chi2_sf_1df(-0.5), std::domain_error);
}

TEST_CASE("information criteria formulas") {
  double aic = 0.0, bic = 0.0;
  information_criteria(-10.5, 3, 20, aic, bic);
  CHECK(aic == doctest::Approx(27.0).epsilon(1e-15));
  CHECK(bic == doctest::Approx(21.0 + 3.0 * std::log(20.0)).epsilon(1e-15));
  information_criteria(-85.7124, 6, 95, aic, bic);
  CHECK(aic == doctest::Approx(2.0 * 85.7124 + 12.0).epsilon(1e-15));
  CHECK(bic == doctest::Approx(2.0 * 85.7124 + 6.0 * std::log(95.0)).epsilon(1e-15));
}
