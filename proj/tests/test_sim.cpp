#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "comcure/sim.hpp"

using namespace comcure;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

SimConfig small_config(std::uint64_t seed) {
  SimConfig cfg;
  cfg.n = 60;
  cfg.subsequent_min = 1;
  cfg.subsequent_max = 4;
  cfg.seed = seed;
  return cfg;
}
}  // namespace

TEST_CASE("defaults describe the standard generation scheme") {
  SimConfig cfg;
  CHECK(cfg.n == 400);
  CHECK(cfg.family == Dispersion::poisson());
  CHECK(cfg.betas == std::vector<double>{0.5, -1.0, -3.0, 2.0});
  CHECK(cfg.weibull_shape == 2.5);
  CHECK(cfg.weibull_scale == 2.5);
  CHECK(cfg.link == LinkFunction::log_link);
  CHECK(cfg.censor_rate == 0.10);
  CHECK(cfg.subsequent_min == 2);
  CHECK(cfg.subsequent_max == 30);
  CHECK(cfg.gap_min == 1.0);
  CHECK(cfg.gap_max == 1.0);
  CHECK(cfg.init_perturbation == 0.15);
  CHECK(cfg.replicates == 200);

  ParamVector truth = sim_truth(cfg);
  CHECK(truth.betas == cfg.betas);
  CHECK(truth.weibull_shape == 2.5);
  LinkConfig link = sim_link(cfg);
  CHECK(link.coefficient_count() == 4);
  CHECK(link.groups.size() == 2);
}

TEST_CASE("draw order is frozen") {
  // Golden values pin the documented draw sequence (exposure count, gaps,
  // covariates, per-exposure counts and promotion times, censoring). Any
  // reordering breaks replicate-level reproducibility guarantees.
  SimConfig cfg;
  rng::Engine eng = rng::make_engine(42, 0);
  SimLatent lat;
  Subject s = generate_subject(cfg, eng, "g1", &lat);
  CHECK(s.exposures.count() == 8);
  CHECK(s.time == 2.1667100799768679);
  CHECK(s.event);
  CHECK(s.covariates.at("x_imm") == 1.0);
  CHECK(s.covariates.at("x_prot") == 0.0);
  CHECK_FALSE(lat.cured);
  CHECK(lat.w == 2.1667100799768679);
  CHECK(lat.c == 2.9320606122434634);

  // The stream continues deterministically into the next subject.
  Subject s2 = generate_subject(cfg, eng, "g2", &lat);
  CHECK(s2.exposures.count() == 22);
  CHECK(s2.time == 3.2288551778440349);
  CHECK(s2.event);
}

TEST_CASE("generation is reproducible per (seed, stream)") {
  SimConfig cfg = small_config(9);
  rng::Engine a = rng::make_engine(9, 2), b = rng::make_engine(9, 2);
  std::vector<Subject> da = generate_dataset(cfg, a), db = generate_dataset(cfg, b);
  REQUIRE(da.size() == db.size());
  for (std::size_t i = 0; i < da.size(); ++i) {
    CHECK(da[i].time == db[i].time);
    CHECK(da[i].event == db[i].event);
    CHECK(da[i].exposures.times() == db[i].exposures.times());
    CHECK(da[i].covariates == db[i].covariates);
    CHECK(da[i].id == db[i].id);
  }

  rng::Engine c = rng::make_engine(9, 3);
  std::vector<Subject> dc = generate_dataset(cfg, c);
  bool differs = false;
  for (std::size_t i = 0; i < da.size() && !differs; ++i)
    differs = da[i].time != dc[i].time || da[i].exposures.count() != dc[i].exposures.count();
  CHECK(differs);
}

TEST_CASE("generated cohorts respect the scheme's structure") {
  SimConfig cfg;  // full Setting 1
  cfg.n = 300;
  rng::Engine eng = rng::make_engine(77, 0);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    SimLatent lat;
    Subject s = generate_subject(cfg, eng, "x" + std::to_string(i), &lat);

    CHECK(s.time > 0.0);
    const auto& t = s.exposures.times();
    REQUIRE(!t.empty());
    CHECK(t[0] == 0.0);
    // Unit gaps, drawn count within [2, 30] subsequent exposures.
    CHECK(t.size() >= 3);
    CHECK(t.size() <= 31);
    for (std::size_t k = 1; k < t.size(); ++k)
      CHECK(t[k] == static_cast<double>(k));  // exact: no gap draw consumed

    double xi = s.covariates.at("x_imm"), xp = s.covariates.at("x_prot");
    CHECK((xi == 0.0 || xi == 1.0));
    CHECK((xp == 0.0 || xp == 1.0));

    // Observed data are consistent with the latent draws.
    CHECK(lat.c > 0.0);
    if (lat.cured) {
      CHECK(lat.w == kInf);
      CHECK(s.time == lat.c);
      CHECK_FALSE(s.event);
    } else {
      CHECK(s.time == std::min(lat.w, lat.c));
      CHECK(s.event == (lat.w <= lat.c));
    }
  }
}

TEST_CASE("dataset ids are sequential and padded") {
  SimConfig cfg = small_config(3);
  cfg.n = 3;
  rng::Engine eng = rng::make_engine(3, 0);
  std::vector<Subject> data = generate_dataset(cfg, eng);
  REQUIRE(data.size() == 3);
  CHECK(data[0].id == "s00001");
  CHECK(data[1].id == "s00002");
  CHECK(data[2].id == "s00003");
}

TEST_CASE("perturbed initializer stays inside the multiplicative band") {
  ParamVector truth = sim_truth(SimConfig{});
  std::vector<double> flat_truth = truth.flat();

  rng::Engine eng = rng::make_engine(13, 0);
  for (int rep = 0; rep < 25; ++rep) {
    ParamVector init = perturb_init(truth, 0.15, eng);
    std::vector<double> flat = init.flat();
    for (std::size_t j = 0; j < flat.size(); ++j) {
      CAPTURE(j);
      CHECK(std::fabs(flat[j] / flat_truth[j] - 1.0) <= 0.15);
    }
  }

  ParamVector same = perturb_init(truth, 0.0, eng);
  CHECK(same.flat() == flat_truth);

  CHECK_THROWS_AS(perturb_init(truth, 1.0, eng), std::invalid_argument);
  CHECK_THROWS_AS(perturb_init(truth, -0.1, eng), std::invalid_argument);
}

TEST_CASE("configuration validation") {
  rng::Engine eng = rng::make_engine(1, 0);
  auto expect_throw = [&](SimConfig cfg) {
    CHECK_THROWS_AS(generate_subject(cfg, eng, "v"), std::invalid_argument);
  };
  SimConfig bad;
  bad.n = 0;
  expect_throw(bad);
  bad = SimConfig{};
  bad.censor_rate = 0.0;
  expect_throw(bad);
  bad = SimConfig{};
  bad.betas = {1.0, 2.0, 3.0};
  expect_throw(bad);
  bad = SimConfig{};
  bad.subsequent_min = 5;
  bad.subsequent_max = 2;
  expect_throw(bad);
  bad = SimConfig{};
  bad.subsequent_min = -1;
  expect_throw(bad);
  bad = SimConfig{};
  bad.gap_min = 0.0;
  expect_throw(bad);
  bad = SimConfig{};
  bad.gap_max = 0.5;  // below gap_min = 1
  expect_throw(bad);
  bad = SimConfig{};
  bad.weibull_shape = 0.0;
  expect_throw(bad);

  // Studies additionally require at least one replicate.
  SimConfig no_reps = small_config(1);
  no_reps.replicates = 0;
  ModelSpec spec;
  spec.family = {Dispersion::poisson()};
  spec.link = sim_link(no_reps);
  CHECK_THROWS_AS(run_fitting_study(no_reps, spec, {}), std::invalid_argument);
  CHECK_THROWS_AS(
      run_discrimination_study(small_config(1), {Dispersion::poisson()}, 0.1, 0, {}),
      std::invalid_argument);
  CHECK_THROWS_AS(
      run_discrimination_study(small_config(1), {}, 0.1, 2, {}),
      std::invalid_argument);
  CHECK_THROWS_AS(
      run_discrimination_study(small_config(1), {Dispersion::poisson()}, 1.5, 2, {}),
      std::invalid_argument);
}

TEST_CASE("fitting study aggregates replicates into calibrated summaries") {
  SimConfig cfg = small_config(21);
  cfg.replicates = 4;
  ModelSpec spec;
  spec.family = {Dispersion::poisson()};
  spec.link = sim_link(cfg);

  SimStudyReport rep = run_fitting_study(cfg, spec, {});
  CHECK(rep.n == cfg.n);
  CHECK(rep.replicates == 4);
  CHECK(rep.failures >= 0);
  CHECK(rep.failures < 4);  // at least one replicate must fit cleanly
  CHECK(rep.seed == cfg.seed);
  CHECK(rep.family_label == "poisson");

  REQUIRE(rep.params.size() == 6);
  const char* names[] = {"beta0", "beta1", "beta2", "beta3", "gamma1", "gamma2"};
  const std::vector<double> truth = sim_truth(cfg).flat();
  for (std::size_t j = 0; j < rep.params.size(); ++j) {
    const ParamSummary& s = rep.params[j];
    CHECK(s.name == names[j]);
    CHECK(s.truth == truth[j]);
    CHECK(std::isfinite(s.mean_estimate));
    CHECK(s.bias == doctest::Approx(s.mean_estimate - s.truth).epsilon(1e-14));
    CHECK(s.rmse >= std::fabs(s.bias) - 1e-12);
    CHECK(s.has_se);
    CHECK(s.mean_se > 0.0);
    CHECK(s.coverage >= 0.0);
    CHECK(s.coverage <= 1.0);
  }

  // Same seed, same report.
  SimStudyReport again = run_fitting_study(cfg, spec, {});
  for (std::size_t j = 0; j < rep.params.size(); ++j) {
    CHECK(again.params[j].mean_estimate == rep.params[j].mean_estimate);
    CHECK(again.params[j].rmse == rep.params[j].rmse);
  }
}

TEST_CASE("profiled fitting study adds a dispersion row without a standard error") {
  SimConfig cfg = small_config(33);
  cfg.replicates = 3;
  ModelSpec spec;
  spec.family = {Dispersion::com(1.0), Dispersion::com(2.0)};
  spec.link = sim_link(cfg);

  SimStudyReport rep = run_fitting_study(cfg, spec, {});
  REQUIRE(rep.params.size() == 7);
  const ParamSummary& nu = rep.params.back();
  CHECK(nu.name == "nu");
  CHECK(nu.truth == 1.0);  // generated from the poisson default
  CHECK_FALSE(nu.has_se);
  CHECK(std::isfinite(nu.mean_estimate));
}

TEST_CASE("discrimination study columns are selection distributions") {
  SimConfig cfg = small_config(41);
  cfg.n = 45;
  std::vector<Dispersion> families = {Dispersion::poisson(), Dispersion::bernoulli()};
  DiscriminationReport rep = run_discrimination_study(cfg, families, 0.2, 3, {});

  REQUIRE(rep.families.size() == 2);
  CHECK(rep.replicates == 3);
  CHECK(rep.level == 0.2);
  REQUIRE(rep.lrt_rejection.size() == 4);
  REQUIRE(rep.aic_selection.size() == 4);
  REQUIRE(rep.bic_selection.size() == 4);
  REQUIRE(rep.failures.size() == 2);

  for (std::size_t t = 0; t < 2; ++t) {
    CHECK(rep.failures[t] >= 0);
    CHECK(rep.failures[t] <= 3);
    if (rep.failures[t] < 3) {
      double aic_total = rep.aic_selection[0 * 2 + t] + rep.aic_selection[1 * 2 + t];
      double bic_total = rep.bic_selection[0 * 2 + t] + rep.bic_selection[1 * 2 + t];
      CHECK(aic_total == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(bic_total == doctest::Approx(1.0).epsilon(1e-12));
    }
    for (std::size_t c = 0; c < 2; ++c) {
      CHECK(rep.lrt_rejection[c * 2 + t] >= 0.0);
      CHECK(rep.lrt_rejection[c * 2 + t] <= 1.0);
    }
  }

  DiscriminationReport again = run_discrimination_study(cfg, families, 0.2, 3, {});
  CHECK(again.lrt_rejection == rep.lrt_rejection);
  CHECK(again.aic_selection == rep.aic_selection);
  CHECK(again.bic_selection == rep.bic_selection);
  CHECK(again.failures == rep.failures);
}

TEST_CASE("chi-square quantile inverts the tail probability") {
  CHECK(chi2_quantile_1df(0.05) == doctest::Approx(3.841458820694124).epsilon(1e-8));
  CHECK(chi2_quantile_1df(0.10) == doctest::Approx(2.705543454095404).epsilon(1e-8));
  CHECK(chi2_sf_1df(chi2_quantile_1df(0.03)) == doctest::Approx(0.03).epsilon(1e-10));
  CHECK_THROWS_AS(chi2_quantile_1df(0.0), std::domain_error);
  CHECK_THROWS_AS(chi2_quantile_1df(1.0), std::domain_error);
}
