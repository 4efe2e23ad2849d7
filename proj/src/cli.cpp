#include "comcure/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "comcure/dataset.hpp"
#include "comcure/em.hpp"
#include "comcure/kaplan_meier.hpp"
#include "comcure/manifest.hpp"
#include "comcure/rng.hpp"
#include "comcure/sim.hpp"

namespace comcure::cli {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// %.17g: enough digits that a reloaded value is bit-identical.
std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt4(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Family tokens: "poisson", "geometric", "bernoulli", "nu=<x>" (bare numbers
// also accepted). Used in manifests, --nu-grid, and report files.

Dispersion parse_family_token(std::string tok) {
  for (char& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (tok == "poisson") return Dispersion::poisson();
  if (tok == "geometric" || tok == "geo") return Dispersion::geometric();
  if (tok == "bernoulli" || tok == "bern" || tok == "inf") return Dispersion::bernoulli();
  if (tok.rfind("nu=", 0) == 0) tok = tok.substr(3);
  std::size_t pos = 0;
  double nu = 0.0;
  try {
    nu = std::stod(tok, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != tok.size() || tok.empty()) {
    throw std::invalid_argument("unknown model family '" + tok +
                                "' (expected poisson, geometric, bernoulli, or nu=<value>)");
  }
  return Dispersion::com(nu);
}

std::string family_token(const Dispersion& d) {
  if (d.is_bernoulli()) return "bernoulli";
  if (d.nu() == 1.0) return "poisson";
  if (d.nu() == 0.0) return "geometric";
  return "nu=" + fmt(d.nu());
}

std::vector<Dispersion> parse_family_list(const std::string& raw) {
  std::string s = raw;
  for (char& c : s) {
    if (c == ',') c = ' ';
  }
  std::istringstream ss(s);
  std::vector<Dispersion> out;
  std::string tok;
  while (ss >> tok) out.push_back(parse_family_token(tok));
  if (out.empty()) throw std::invalid_argument("empty model family list");
  return out;
}

// Grid rows are reported (and fitted, for warm starting) in dispersion
// order, with the bernoulli limit last.
void order_grid(std::vector<Dispersion>& grid) {
  std::stable_sort(grid.begin(), grid.end(), [](const Dispersion& a, const Dispersion& b) {
    if (a.is_bernoulli() || b.is_bernoulli()) return !a.is_bernoulli() && b.is_bernoulli();
    return a.nu() < b.nu();
  });
}

// ---------------------------------------------------------------------------
// Manifest-driven configuration. All sections are optional unless a command
// says otherwise; defaults are documented in the README.

SeriesPolicy load_series(const Manifest* man) {
  SeriesPolicy p;
  if (man) {
    p.rel_tol = man->get_double_or("series", "rel_tol", p.rel_tol);
    p.max_terms = static_cast<int>(man->get_int_or("series", "max_terms", p.max_terms));
  }
  return p;
}

EMConfig load_em(const Manifest* man) {
  EMConfig c;
  if (man) {
    c.tol = man->get_double_or("em", "tol", c.tol);
    c.max_iter = static_cast<int>(man->get_int_or("em", "max_iter", c.max_iter));
    c.m_step.max_evals =
        static_cast<int>(man->get_int_or("em", "m_step_max_evals", c.m_step.max_evals));
    c.m_step.step = man->get_double_or("em", "m_step_step", c.m_step.step);
    c.m_step.f_tol = man->get_double_or("em", "m_step_f_tol", c.m_step.f_tol);
  }
  if (c.tol <= 0.0 || c.max_iter < 0) {
    throw std::invalid_argument("[em] tol must be positive and max_iter nonnegative");
  }
  return c;
}

LinkFunction parse_link_function(const std::string& tok) {
  if (tok == "log") return LinkFunction::log_link;
  if (tok == "logistic") return LinkFunction::logistic;
  throw std::invalid_argument("unknown link function '" + tok + "' (expected log or logistic)");
}

std::string link_function_token(LinkFunction f) {
  return f == LinkFunction::log_link ? "log" : "logistic";
}

// Declarative form of a LinkConfig that can be written to and reloaded
// from a report file.
struct LinkDesc {
  LinkFunction function = LinkFunction::log_link;
  std::string scheme = "shared";  // or "initial_vs_subsequent"
  std::vector<std::string> shared_covs;
  std::vector<std::string> initial_covs;
  std::vector<std::string> subsequent_covs;

  LinkConfig config() const {
    if (scheme == "shared") return LinkConfig::shared(shared_covs, function);
    return LinkConfig::initial_vs_subsequent(initial_covs, subsequent_covs, function);
  }

  std::vector<std::string> coefficient_names() const {
    std::vector<std::string> names;
    const auto block = [&](const std::string& label, const std::vector<std::string>& covs) {
      names.push_back(label + ".intercept");
      for (const std::string& c : covs) names.push_back(label + "." + c);
    };
    if (scheme == "shared") {
      block("theta", shared_covs);
    } else {
      block("initial", initial_covs);
      block("subsequent", subsequent_covs);
    }
    return names;
  }
};

// `default_covs`: covariates to use for the shared scheme when the manifest
// does not pin a list (every covariate column in the dataset).
LinkDesc load_link_desc(const Manifest* man, const std::vector<std::string>& default_covs) {
  LinkDesc d;
  d.shared_covs = default_covs;
  if (!man) return d;
  d.function = parse_link_function(man->get_or("link", "function", "log"));
  const bool two_group =
      man->has("link", "initial_covariates") || man->has("link", "subsequent_covariates");
  d.scheme = man->get_or("link", "scheme", two_group ? "initial_vs_subsequent" : "shared");
  if (d.scheme != "shared" && d.scheme != "initial_vs_subsequent") {
    throw std::invalid_argument("unknown link scheme '" + d.scheme +
                                "' (expected shared or initial_vs_subsequent)");
  }
  if (man->has("link", "covariates")) {
    d.shared_covs = man->get_string_list("link", "covariates");
  }
  if (man->has("link", "initial_covariates")) {
    d.initial_covs = man->get_string_list("link", "initial_covariates");
  }
  if (man->has("link", "subsequent_covariates")) {
    d.subsequent_covs = man->get_string_list("link", "subsequent_covariates");
  }
  return d;
}

void check_covariates_exist(const LinkDesc& desc, const Dataset& data,
                            const std::string& origin) {
  const auto known = [&](const std::string& name) {
    return std::find(data.covariate_names.begin(), data.covariate_names.end(), name) !=
           data.covariate_names.end();
  };
  for (const auto* covs : {&desc.shared_covs, &desc.initial_covs, &desc.subsequent_covs}) {
    for (const std::string& c : *covs) {
      if (!known(c)) {
        throw std::invalid_argument(origin + " references covariate '" + c +
                                    "' not present in the dataset");
      }
    }
  }
}

std::size_t max_exposure_count(const Dataset& data) {
  std::size_t n = 0;
  for (const Subject& s : data.subjects) n = std::max(n, s.exposures.count());
  return n;
}

// ---------------------------------------------------------------------------
// Initializers.

// Weibull (shape, scale) matched to the sample mean and variance of the
// observed event times: the coefficient of variation pins the shape via
// Gamma(1+2/k)/Gamma(1+1/k)^2 = 1 + cv^2, then the mean pins the scale.
std::pair<double, double> moment_weibull(std::span<const Subject> data) {
  std::vector<double> times;
  for (const Subject& s : data) {
    if (s.event) times.push_back(s.time);
  }
  if (times.size() < 2) {
    times.clear();
    for (const Subject& s : data) times.push_back(s.time);
  }
  double mean = 0.0;
  for (double t : times) mean += t;
  mean /= static_cast<double>(times.size());
  double var = 0.0;
  for (double t : times) var += (t - mean) * (t - mean);
  var /= static_cast<double>(times.size() - 1);
  if (!(mean > 0.0) || !(var > 0.0)) return {1.0, std::max(mean, 1.0)};

  const double target = std::log1p(var / (mean * mean));
  const auto g = [&](double k) {
    return std::lgamma(1.0 + 2.0 / k) - 2.0 * std::lgamma(1.0 + 1.0 / k) - target;
  };
  double lo = 0.02, hi = 200.0;
  if (g(lo) < 0.0) return {lo, mean / std::exp(std::lgamma(1.0 + 1.0 / lo))};
  if (g(hi) > 0.0) return {hi, mean / std::exp(std::lgamma(1.0 + 1.0 / hi))};
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) > 0.0 ? lo : hi) = mid;
  }
  const double shape = 0.5 * (lo + hi);
  return {shape, mean / std::exp(std::lgamma(1.0 + 1.0 / shape))};
}

// Coordinate-wise grid search for the regression coefficients over
// [-5, 5] in steps of 0.5, scored by the observed log-likelihood of the
// Poisson model with the moment-matched Weibull held fixed.
std::vector<double> grid_search_betas(std::span<const Subject> data,
                                      const LinkConfig& link, const SeriesPolicy& series,
                                      double shape, double scale) {
  ModelSpec score_spec{{Dispersion::poisson()}, link, series};
  ParamVector pv;
  pv.betas.assign(link.coefficient_count(), 0.0);
  pv.weibull_shape = shape;
  pv.weibull_scale = scale;
  const auto score = [&]() {
    try {
      const double l = observed_loglik(data, pv, score_spec);
      return std::isfinite(l) ? l : -kInf;
    } catch (const std::exception&) {
      return -kInf;
    }
  };
  double best = score();
  for (int sweep = 0; sweep < 3; ++sweep) {
    for (std::size_t j = 0; j < pv.betas.size(); ++j) {
      const double keep = pv.betas[j];
      double best_bj = keep;
      for (int step = 0; step <= 20; ++step) {
        pv.betas[j] = -5.0 + 0.5 * step;
        const double l = score();
        if (l > best) {
          best = l;
          best_bj = pv.betas[j];
        }
      }
      pv.betas[j] = best_bj;
    }
  }
  return pv.betas;
}

ParamVector manual_init(const Manifest* man, std::size_t n_coef) {
  if (!man || !man->has("init", "betas")) {
    throw std::invalid_argument("initializer needs [init] betas in the manifest");
  }
  ParamVector pv;
  pv.betas = man->get_double_list("init", "betas");
  if (pv.betas.size() != n_coef) {
    throw std::invalid_argument("[init] betas has " + std::to_string(pv.betas.size()) +
                                " entries but the link scheme needs " + std::to_string(n_coef));
  }
  pv.weibull_shape = man->get_double_or("init", "weibull_shape", 1.0);
  pv.weibull_scale = man->get_double_or("init", "weibull_scale", 1.0);
  if (pv.weibull_shape <= 0.0 || pv.weibull_scale <= 0.0) {
    throw std::invalid_argument("[init] weibull parameters must be positive");
  }
  return pv;
}

ParamVector build_init(const std::string& strategy_flag, const Manifest* man,
                       std::span<const Subject> data, const LinkConfig& link,
                       const SeriesPolicy& series, std::uint64_t seed) {
  std::string strategy = strategy_flag;
  if (strategy.empty() && man) strategy = man->get_or("init", "strategy", "");
  if (strategy.empty()) {
    strategy = man && man->has("init", "betas") ? "manual" : "moment";
  }

  if (strategy == "manual") return manual_init(man, link.coefficient_count());
  if (strategy == "perturb") {
    ParamVector pv = manual_init(man, link.coefficient_count());
    const double p = man->get_double_or("init", "perturbation", 0.15);
    rng::Engine eng = rng::make_engine(seed, 0);
    return perturb_init(pv, p, eng);
  }
  if (strategy == "moment") {
    ParamVector pv;
    pv.betas.assign(link.coefficient_count(), 0.0);
    std::tie(pv.weibull_shape, pv.weibull_scale) = moment_weibull(data);
    return pv;
  }
  if (strategy == "grid") {
    ParamVector pv;
    std::tie(pv.weibull_shape, pv.weibull_scale) = moment_weibull(data);
    pv.betas = grid_search_betas(data, link, series, pv.weibull_shape, pv.weibull_scale);
    return pv;
  }
  throw std::invalid_argument("unknown init strategy '" + strategy +
                              "' (expected perturb, grid, moment, or manual)");
}

// ---------------------------------------------------------------------------
// Output plumbing. Every file starts with the same provenance triple so a
// result can always be traced back to its inputs.

struct Provenance {
  std::string data = "none";
  std::string manifest = "none";
  std::uint64_t seed = 0;
};

std::uint64_t resolve_seed(const Options& options, const Manifest* man) {
  if (options.seed_set) return options.seed;
  if (man) {
    if (man->has("run", "seed")) return static_cast<std::uint64_t>(man->get_int("run", "seed"));
    if (man->has("sim", "seed")) return static_cast<std::uint64_t>(man->get_int("sim", "seed"));
  }
  return 0;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write output file: " + path);
  return out;
}

void provenance_comment(std::ostream& out, const Provenance& p) {
  out << "# provenance: data=" << p.data << " manifest=" << p.manifest << " seed=" << p.seed
      << "\n";
}

void provenance_section(std::ostream& out, const Provenance& p) {
  out << "[provenance]\n"
      << "data = " << p.data << "\n"
      << "manifest = " << p.manifest << "\n"
      << "seed = " << p.seed << "\n";
}

void write_link_section(std::ostream& out, const LinkDesc& desc) {
  const auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) s += ",";
      s += v[i];
    }
    return s;
  };
  out << "[link]\n"
      << "function = " << link_function_token(desc.function) << "\n"
      << "scheme = " << desc.scheme << "\n";
  if (desc.scheme == "shared") {
    out << "covariates = " << join(desc.shared_covs) << "\n";
  } else {
    out << "initial_covariates = " << join(desc.initial_covs) << "\n"
        << "subsequent_covariates = " << join(desc.subsequent_covs) << "\n";
  }
}

void write_fit_report(const std::string& path, const Provenance& prov,
                      const LinkDesc& desc, const SeriesPolicy& series,
                      const FitResult& res, std::span<const Subject> subjects) {
  const std::vector<std::string> names = desc.coefficient_names();
  std::ofstream out = open_out(path);
  out << "# cure model fit report\n";
  provenance_comment(out, prov);
  out << "#\n"
      << "# family: " << res.family.label() << "   subjects: " << res.n_subjects
      << "   events: "
      << std::count_if(subjects.begin(), subjects.end(),
                       [](const Subject& s) { return s.event; })
      << "\n"
      << "# loglik: " << fmt4(res.loglik) << "   AIC: " << fmt4(res.aic)
      << "   BIC: " << fmt4(res.bic) << "\n"
      << "# " << (res.converged ? "converged" : "DID NOT CONVERGE") << " after "
      << res.iterations << " iterations\n"
      << "#\n"
      << "# parameter            estimate   std.err    95% CI\n";
  const std::vector<double> flat = res.params.flat();
  for (std::size_t j = 0; j < flat.size(); ++j) {
    const std::string name = j < names.size() ? names[j] : (j == names.size() ? "weibull_shape" : "weibull_scale");
    char line[160];
    if (res.se_ok) {
      std::snprintf(line, sizeof line, "# %-20s %9.4f %9.4f   [%9.4f, %9.4f]\n", name.c_str(),
                    flat[j], res.se[j], res.ci95[j].first, res.ci95[j].second);
    } else {
      std::snprintf(line, sizeof line, "# %-20s %9.4f        --   [       --,        --]\n",
                    name.c_str(), flat[j]);
    }
    out << line;
  }
  out << "\n";
  provenance_section(out, prov);
  out << "\n[model]\n"
      << "family = " << family_token(res.family) << "\n";
  out << "\n";
  write_link_section(out, desc);
  out << "\n[series]\n"
      << "rel_tol = " << fmt(series.rel_tol) << "\n"
      << "max_terms = " << series.max_terms << "\n";
  out << "\n[fit]\n"
      << "converged = " << (res.converged ? "true" : "false") << "\n"
      << "iterations = " << res.iterations << "\n"
      << "n_subjects = " << res.n_subjects << "\n"
      << "n_params = " << res.n_params << "\n"
      << "loglik = " << fmt(res.loglik) << "\n"
      << "aic = " << fmt(res.aic) << "\n"
      << "bic = " << fmt(res.bic) << "\n"
      << "se_ok = " << (res.se_ok ? "true" : "false") << "\n";
  out << "\n[estimates]\n";
  for (std::size_t j = 0; j < flat.size(); ++j) {
    const std::string name = j < names.size() ? names[j] : (j == names.size() ? "weibull_shape" : "weibull_scale");
    out << name << " = " << fmt(flat[j]) << "\n";
  }
  if (res.se_ok) {
    out << "\n[uncertainty]\n";
    for (std::size_t j = 0; j < flat.size(); ++j) {
      const std::string name = j < names.size() ? names[j] : (j == names.size() ? "weibull_shape" : "weibull_scale");
      out << name << " = " << fmt(res.se[j]) << "," << fmt(res.ci95[j].first) << ","
          << fmt(res.ci95[j].second) << "\n";
    }
  }
  if (!res.profile_trace.empty()) {
    out << "\n[profile]\n";
    for (std::size_t i = 0; i < res.profile_trace.size(); ++i) {
      const auto& [nu, l] = res.profile_trace[i];
      const std::string tok =
          std::isinf(nu) ? "bernoulli" : family_token(Dispersion::com(nu));
      double aic = 0.0, bic = 0.0;
      information_criteria(l, res.n_params, res.n_subjects, aic, bic);
      out << "point." << i << " = " << tok << "," << fmt(l) << "," << fmt(aic) << ","
          << fmt(bic) << "\n";
    }
    out << "selected = " << family_token(res.family) << "\n";
  }
  out << "\n[trace]\n";
  for (std::size_t k = 0; k < res.loglik_trace.size(); ++k) {
    out << "loglik." << k << " = " << fmt(res.loglik_trace[k]) << "\n";
  }
  out << "\n[cure_probabilities]\n";
  for (std::size_t i = 0; i < res.cure_probs.size(); ++i) {
    out << "subject." << i << " = " << subjects[i].id << "," << fmt(res.cure_probs[i]) << "\n";
  }
  if (!out) throw std::invalid_argument("write failed: " + path);
}

// Shared setup for fit and profile: dataset, manifest, model pieces.
struct FitContext {
  Dataset data;
  std::optional<Manifest> manifest;
  Provenance prov;
  LinkDesc link_desc;
  SeriesPolicy series;
  EMConfig em;
  ParamVector init;
};

FitContext prepare_fit(const Options& options) {
  if (options.data_path.empty()) throw std::invalid_argument("--data is required");
  FitContext ctx;
  ctx.data = read_dataset(options.data_path);
  if (ctx.data.subjects.empty()) {
    throw std::invalid_argument(options.data_path + ": dataset has no rows");
  }
  const Manifest* man = nullptr;
  if (!options.manifest_path.empty()) {
    ctx.manifest = Manifest::parse_file(options.manifest_path);
    man = &*ctx.manifest;
  }
  ctx.prov.data = hash_hex(hash_file(options.data_path));
  ctx.prov.manifest = man ? hash_hex(man->hash()) : "none";
  ctx.prov.seed = resolve_seed(options, man);

  ctx.link_desc = load_link_desc(man, ctx.data.covariate_names);
  check_covariates_exist(ctx.link_desc, ctx.data,
                         man ? man->origin() : "default link");
  ctx.series = load_series(man);
  ctx.em = load_em(man);

  const LinkConfig link = ctx.link_desc.config();
  link.validate(std::max<std::size_t>(max_exposure_count(ctx.data), 1));
  ctx.init = build_init(options.init_strategy, man, ctx.data.subjects, link, ctx.series,
                        ctx.prov.seed);
  return ctx;
}

}  // namespace

// ---------------------------------------------------------------------------
// Commands.

int cmd_fit(const Options& options) {
  FitContext ctx = prepare_fit(options);
  const Manifest* man = ctx.manifest ? &*ctx.manifest : nullptr;
  if (!options.nu_grid.empty() || (man && man->has("model", "nu_grid"))) {
    throw std::invalid_argument("fit expects a single family; use the profile command for a grid");
  }
  ModelSpec spec{{parse_family_token(man ? man->get_or("model", "family", "poisson")
                                         : "poisson")},
                 ctx.link_desc.config(), ctx.series};

  const FitResult res = fit(ctx.data.subjects, spec, ctx.init, ctx.em);
  const std::string out = options.out_path.empty() ? "fit_report.txt" : options.out_path;
  write_fit_report(out, ctx.prov, ctx.link_desc, ctx.series, res, ctx.data.subjects);
  std::cout << "fit: family=" << res.family.label() << " loglik=" << fmt4(res.loglik)
            << " aic=" << fmt4(res.aic) << " bic=" << fmt4(res.bic)
            << (res.converged ? " (converged after " : " (stopped without converging after ")
            << res.iterations << " iterations)\nreport written to " << out << "\n";
  return res.converged ? 0 : 3;
}

int cmd_profile(const Options& options) {
  FitContext ctx = prepare_fit(options);
  const Manifest* man = ctx.manifest ? &*ctx.manifest : nullptr;
  std::vector<Dispersion> grid;
  if (!options.nu_grid.empty()) {
    grid = parse_family_list(options.nu_grid);
  } else if (man && man->has("model", "nu_grid")) {
    grid = parse_family_list(man->get("model", "nu_grid"));
  } else {
    throw std::invalid_argument("profile needs a dispersion grid (--nu-grid or [model] nu_grid)");
  }
  order_grid(grid);
  ModelSpec spec{grid, ctx.link_desc.config(), ctx.series};

  const FitResult res = profile_fit(ctx.data.subjects, spec, ctx.init, ctx.em);
  const std::string out = options.out_path.empty() ? "profile_report.txt" : options.out_path;
  write_fit_report(out, ctx.prov, ctx.link_desc, ctx.series, res, ctx.data.subjects);

  // Plot-ready profile curve: one row per grid point, dispersion order.
  const std::string curve_path = out + ".curve.tsv";
  std::ofstream curve = open_out(curve_path);
  provenance_comment(curve, ctx.prov);
  curve << "# profile likelihood over the dispersion grid; selected family: "
        << res.family.label() << "\n"
        << "# columns: nu loglik aic bic selected\n";
  for (std::size_t i = 0; i < res.profile_trace.size(); ++i) {
    const auto& [nu, l] = res.profile_trace[i];
    const Dispersion d = std::isinf(nu) ? Dispersion::bernoulli() : Dispersion::com(nu);
    double aic = 0.0, bic = 0.0;
    information_criteria(l, res.n_params, res.n_subjects, aic, bic);
    curve << (std::isinf(nu) ? std::string("inf") : fmt(nu)) << "\t" << fmt(l) << "\t"
          << fmt(aic) << "\t" << fmt(bic) << "\t" << (d == res.family ? 1 : 0) << "\n";
  }
  if (!curve) throw std::invalid_argument("write failed: " + curve_path);

  std::cout << "profile: selected " << res.family.label() << " with loglik=" << fmt4(res.loglik)
            << " over " << res.profile_trace.size() << " grid points\nreport written to " << out
            << "\ncurve written to " << curve_path << "\n";
  return res.converged ? 0 : 3;
}

int cmd_km(const Options& options) {
  if (options.data_path.empty()) throw std::invalid_argument("--data is required");
  const Dataset ds = read_dataset(options.data_path);
  if (ds.subjects.empty()) {
    throw std::invalid_argument(options.data_path + ": dataset has no rows");
  }
  std::vector<double> times;
  std::vector<int> status;
  for (const Subject& s : ds.subjects) {
    times.push_back(s.time);
    status.push_back(s.event ? 1 : 0);
  }
  const KmCurve curve = kaplan_meier(times, status);

  Provenance prov;
  prov.data = hash_hex(hash_file(options.data_path));
  prov.seed = options.seed_set ? options.seed : 0;
  const std::string out = options.out_path.empty() ? "km.tsv" : options.out_path;
  std::ofstream f = open_out(out);
  provenance_comment(f, prov);
  f << "# Kaplan-Meier product-limit estimate, n = " << curve.n << "\n"
    << "# columns: time at_risk events censored survival\n";
  for (const KmPoint& p : curve.points) {
    f << fmt(p.time) << "\t" << p.at_risk << "\t" << p.events << "\t" << p.censored << "\t"
      << fmt(p.survival) << "\n";
  }
  if (!f) throw std::invalid_argument("write failed: " + out);
  std::cout << "km: " << curve.points.size() << " distinct times, final survival "
            << fmt4(curve.points.back().survival) << "\ncurve written to " << out << "\n";
  return 0;
}

int cmd_predict(const Options& options) {
  if (options.report_path.empty()) {
    throw std::invalid_argument("--report is required (a fit report to predict from)");
  }
  const Manifest rep = Manifest::parse_file(options.report_path);

  // Rebuild the fitted model from the report sections.
  const Dispersion family = parse_family_token(rep.get("model", "family"));
  const LinkDesc desc = load_link_desc(&rep, {});
  SeriesPolicy series;
  series.rel_tol = rep.get_double_or("series", "rel_tol", series.rel_tol);
  series.max_terms = static_cast<int>(rep.get_int_or("series", "max_terms", series.max_terms));
  ParamVector params;
  for (const std::string& key : rep.keys("estimates")) {
    const double v = rep.get_double("estimates", key);
    if (key == "weibull_shape") {
      params.weibull_shape = v;
    } else if (key == "weibull_scale") {
      params.weibull_scale = v;
    } else {
      params.betas.push_back(v);
    }
  }
  const LinkConfig link = desc.config();
  if (params.betas.size() != link.coefficient_count()) {
    throw std::invalid_argument(options.report_path + ": [estimates] lists " +
                                std::to_string(params.betas.size()) +
                                " coefficients but the link scheme needs " +
                                std::to_string(link.coefficient_count()));
  }
  const ModelSpec spec{{family}, link, series};

  // Covariate profile: name=value pairs.
  std::map<std::string, double> covs;
  if (!options.profile.empty()) {
    std::string s = options.profile;
    for (char& c : s) {
      if (c == ',') c = ' ';
    }
    std::istringstream ss(s);
    std::string pair;
    while (ss >> pair) {
      const std::size_t eq = pair.find('=');
      if (eq == std::string::npos || eq == 0) {
        throw std::invalid_argument("--covariates expects name=value pairs, got '" + pair + "'");
      }
      std::size_t pos = 0;
      double v = 0.0;
      try {
        v = std::stod(pair.substr(eq + 1), &pos);
      } catch (const std::exception&) {
        pos = std::string::npos;
      }
      if (pos != pair.size() - eq - 1) {
        throw std::invalid_argument("--covariates value in '" + pair + "' is not a number");
      }
      covs[pair.substr(0, eq)] = v;
    }
  }

  // Exposure schedule: explicit times, or a count of unit-spaced ones.
  std::vector<double> times;
  if (!options.exposure_times.empty()) {
    std::istringstream ss(options.exposure_times);
    std::string tok;
    while (std::getline(ss, tok, ';')) {
      std::size_t pos = 0;
      double v = 0.0;
      try {
        v = std::stod(tok, &pos);
      } catch (const std::exception&) {
        pos = std::string::npos;
      }
      if (pos != tok.size() || tok.empty()) {
        throw std::invalid_argument("--exposure-times entry '" + tok + "' is not a number");
      }
      times.push_back(v);
    }
  } else {
    const long n = options.exposure_count > 0 ? options.exposure_count : 1;
    times.resize(static_cast<std::size_t>(n));
    for (std::size_t k = 0; k < times.size(); ++k) times[k] = static_cast<double>(k);
  }
  Subject subject{1.0, false, ExposureProfile(std::move(times)), covs, "profile"};

  const double p0 = cure_rate(subject, params, spec);
  const double t_last = subject.exposures.times().back();
  const double y_max =
      options.y_max > 0.0 ? options.y_max : t_last + 5.0 * params.weibull_scale;
  const long points = options.y_points;
  if (points < 2) throw std::invalid_argument("--points must be at least 2");
  if (!(y_max > 0.0)) throw std::invalid_argument("--ymax must be positive");

  Provenance prov;
  prov.data = "none";
  prov.manifest = hash_hex(rep.hash());  // the report stands in for the manifest
  prov.seed = options.seed_set ? options.seed : 0;

  const std::string out = options.out_path.empty() ? "predict.tsv" : options.out_path;
  std::ofstream f = open_out(out);
  provenance_comment(f, prov);
  f << "# predicted survival, family " << family.label() << ", " << subject.exposures.count()
    << " exposures\n"
    << "# cure_probability = " << fmt(p0) << "\n";
  const bool degenerate = 1.0 - p0 < 1e-12;
  f << "# columns: y s_pop" << (degenerate ? "" : " s1") << "\n";
  for (long i = 0; i < points; ++i) {
    const double y = y_max * static_cast<double>(i) / static_cast<double>(points - 1);
    const double sp = s_pop(y, subject, params, spec);
    f << fmt(y) << "\t" << fmt(sp);
    if (!degenerate) f << "\t" << fmt(s1(y, subject, params, spec));
    f << "\n";
  }
  if (!f) throw std::invalid_argument("write failed: " + out);
  std::cout << "predict: cure probability " << fmt4(p0) << ", curve of " << points
            << " points written to " << out << "\n";
  return 0;
}

namespace {

SimConfig load_sim_config(const Options& options, const Manifest& man) {
  SimConfig cfg;
  cfg.n = static_cast<std::size_t>(man.get_int_or("sim", "n", static_cast<long>(cfg.n)));
  cfg.family = parse_family_token(man.get_or("sim", "family", "poisson"));
  if (man.has("sim", "betas")) cfg.betas = man.get_double_list("sim", "betas");
  cfg.weibull_shape = man.get_double_or("sim", "weibull_shape", cfg.weibull_shape);
  cfg.weibull_scale = man.get_double_or("sim", "weibull_scale", cfg.weibull_scale);
  cfg.link = parse_link_function(man.get_or("sim", "link", "log"));
  cfg.censor_rate = man.get_double_or("sim", "censor_rate", cfg.censor_rate);
  cfg.subsequent_min =
      static_cast<int>(man.get_int_or("sim", "subsequent_min", cfg.subsequent_min));
  cfg.subsequent_max =
      static_cast<int>(man.get_int_or("sim", "subsequent_max", cfg.subsequent_max));
  cfg.gap_min = man.get_double_or("sim", "gap_min", cfg.gap_min);
  cfg.gap_max = man.get_double_or("sim", "gap_max", cfg.gap_max);
  cfg.init_perturbation = man.get_double_or("sim", "perturbation", cfg.init_perturbation);
  cfg.replicates = static_cast<int>(man.get_int_or("sim", "replicates", cfg.replicates));
  cfg.seed = resolve_seed(options, &man);
  cfg.series = load_series(&man);
  return cfg;
}

// Study fits default to the generating family; [sim] fit_family or
// fit_nu_grid overrides (the latter runs the profile fit per replicate).
ModelSpec load_fit_spec(const SimConfig& cfg, const Manifest& man) {
  ModelSpec spec{{cfg.family}, sim_link(cfg), cfg.series};
  if (man.has("sim", "fit_nu_grid")) {
    spec.family = parse_family_list(man.get("sim", "fit_nu_grid"));
    order_grid(spec.family);
  } else if (man.has("sim", "fit_family")) {
    spec.family = {parse_family_token(man.get("sim", "fit_family"))};
  }
  return spec;
}

std::string indexed_path(const std::string& base, long index, long total) {
  if (total <= 1) return base;
  const std::filesystem::path p(base);
  std::filesystem::path q = p.parent_path();
  q /= p.stem().string() + "_" + std::to_string(index) + p.extension().string();
  return q.string();
}

void write_study_report(const std::string& path, const Provenance& prov,
                        const SimStudyReport& rep) {
  std::ofstream out = open_out(path);
  out << "# simulation fitting study\n";
  provenance_comment(out, prov);
  out << "#\n"
      << "# family " << rep.family_label << ", n = " << rep.n << ", " << rep.replicates
      << " replicates (" << rep.failures << " failed)\n"
      << "#\n"
      << "# parameter            truth      mean.est   mean.se    bias       rmse       coverage\n";
  for (const ParamSummary& p : rep.params) {
    char line[200];
    if (p.has_se) {
      std::snprintf(line, sizeof line, "# %-20s %9.4f  %9.4f  %9.4f  %9.4f  %9.4f  %9.4f\n",
                    p.name.c_str(), p.truth, p.mean_estimate, p.mean_se, p.bias, p.rmse,
                    p.coverage);
    } else {
      std::snprintf(line, sizeof line, "# %-20s %9.4f  %9.4f         --  %9.4f  %9.4f        --\n",
                    p.name.c_str(), p.truth, p.mean_estimate, p.bias, p.rmse);
    }
    out << line;
  }
  out << "\n";
  provenance_section(out, prov);
  out << "\n[study]\n"
      << "family = " << rep.family_label << "\n"
      << "n = " << rep.n << "\n"
      << "replicates = " << rep.replicates << "\n"
      << "failures = " << rep.failures << "\n";
  out << "\n[summary]\n";
  for (const ParamSummary& p : rep.params) {
    out << p.name << " = " << fmt(p.truth) << "," << fmt(p.mean_estimate) << ","
        << (p.has_se ? fmt(p.mean_se) : "nan") << "," << fmt(p.bias) << "," << fmt(p.rmse)
        << "," << (p.has_se ? fmt(p.coverage) : "nan") << "\n";
  }
  if (!out) throw std::invalid_argument("write failed: " + path);
}

void write_matrix(std::ostream& out, const std::string& section,
                  const std::vector<Dispersion>& families, const std::vector<double>& m) {
  const std::size_t k = families.size();
  out << "\n[" << section << "]\n";
  for (std::size_t i = 0; i < k; ++i) {
    out << "row." << i << " = ";
    for (std::size_t j = 0; j < k; ++j) {
      if (j) out << ",";
      out << fmt(m[i * k + j]);
    }
    out << "\n";
  }
}

}  // namespace

int cmd_simulate(const Options& options) {
  if (options.manifest_path.empty()) {
    throw std::invalid_argument("--manifest is required (needs a [sim] section)");
  }
  const Manifest man = Manifest::parse_file(options.manifest_path);
  const SimConfig cfg = load_sim_config(options, man);

  Provenance prov;
  prov.manifest = hash_hex(man.hash());
  prov.seed = cfg.seed;

  const std::string mode = man.get_or("sim", "mode", "dataset");
  if (mode == "dataset") {
    const long count = man.get_int_or("sim", "datasets", 1);
    if (count < 1) throw std::invalid_argument("[sim] datasets must be at least 1");
    const std::string base = options.out_path.empty() ? "sim_data.csv" : options.out_path;
    std::vector<std::string> cov_names = {"x_imm", "x_prot"};
    for (long k = 0; k < count; ++k) {
      rng::Engine eng = rng::make_engine(cfg.seed, static_cast<std::uint64_t>(k));
      const std::vector<Subject> subjects = generate_dataset(cfg, eng);
      const std::string path = indexed_path(base, k, count);
      std::ostringstream head;
      provenance_comment(head, prov);
      head << "# replicate " << k << " of " << count << ", family " << cfg.family.label()
           << "\n";
      write_dataset(path, subjects, cov_names, head.str());
      std::cout << "simulate: wrote " << subjects.size() << " subjects to " << path << "\n";
    }
    return 0;
  }
  if (mode == "study") {
    const ModelSpec fit_spec = load_fit_spec(cfg, man);
    const EMConfig em = load_em(&man);
    const SimStudyReport rep = run_fitting_study(cfg, fit_spec, em);
    const std::string out = options.out_path.empty() ? "study_report.txt" : options.out_path;
    write_study_report(out, prov, rep);
    std::cout << "simulate: study of " << rep.replicates << " replicates (" << rep.failures
              << " failed), report written to " << out << "\n";
    return 0;
  }
  throw std::invalid_argument("[sim] mode must be dataset or study, got '" + mode + "'");
}

int cmd_discriminate(const Options& options) {
  if (options.manifest_path.empty()) {
    throw std::invalid_argument("--manifest is required (needs [sim] and [discriminate])");
  }
  const Manifest man = Manifest::parse_file(options.manifest_path);
  const SimConfig cfg = load_sim_config(options, man);

  std::vector<Dispersion> families;
  if (!options.nu_grid.empty()) {
    families = parse_family_list(options.nu_grid);
  } else {
    families = parse_family_list(man.get("discriminate", "families"));
  }
  if (families.size() < 2) {
    throw std::invalid_argument("discrimination needs at least two candidate families");
  }
  const double level = man.get_double_or("discriminate", "level", 0.10);
  const int replicates =
      static_cast<int>(man.get_int_or("discriminate", "replicates", cfg.replicates));
  const EMConfig em = load_em(&man);

  const DiscriminationReport rep =
      run_discrimination_study(cfg, families, level, replicates, em);

  Provenance prov;
  prov.manifest = hash_hex(man.hash());
  prov.seed = cfg.seed;
  const std::string out =
      options.out_path.empty() ? "discrimination_report.txt" : options.out_path;
  std::ofstream f = open_out(out);
  f << "# model discrimination study\n";
  provenance_comment(f, prov);
  f << "#\n# candidates:";
  for (const Dispersion& d : rep.families) f << " " << d.label();
  f << "\n# " << rep.replicates << " replicates per true family, LRT level "
    << fmt4(rep.level) << "\n";
  const std::size_t k = rep.families.size();
  const auto table = [&](const std::string& title, const std::vector<double>& m) {
    f << "#\n# " << title << " (row = fitted/selected, column = true)\n# " << std::string(14, ' ');
    for (const Dispersion& d : rep.families) {
      char cell[32];
      std::snprintf(cell, sizeof cell, " %12s", d.label().c_str());
      f << cell;
    }
    f << "\n";
    for (std::size_t i = 0; i < k; ++i) {
      char head[40];
      std::snprintf(head, sizeof head, "# %-14s", rep.families[i].label().c_str());
      f << head;
      for (std::size_t j = 0; j < k; ++j) {
        char cell[32];
        std::snprintf(cell, sizeof cell, " %12.4f", m[i * k + j]);
        f << cell;
      }
      f << "\n";
    }
  };
  table("LRT rejection rate", rep.lrt_rejection);
  table("AIC selection rate", rep.aic_selection);
  table("BIC selection rate", rep.bic_selection);
  f << "\n";
  provenance_section(f, prov);
  f << "\n[discrimination]\n"
    << "families = ";
  for (std::size_t i = 0; i < k; ++i) f << (i ? "," : "") << family_token(rep.families[i]);
  f << "\nlevel = " << fmt(rep.level) << "\n"
    << "replicates = " << rep.replicates << "\n"
    << "failures = ";
  for (std::size_t i = 0; i < k; ++i) f << (i ? "," : "") << rep.failures[i];
  f << "\n";
  write_matrix(f, "lrt", rep.families, rep.lrt_rejection);
  write_matrix(f, "aic", rep.families, rep.aic_selection);
  write_matrix(f, "bic", rep.families, rep.bic_selection);
  if (!f) throw std::invalid_argument("write failed: " + out);
  std::cout << "discriminate: " << k << " candidate families, report written to " << out << "\n";
  return 0;
}

int run(const Options& options) {
  try {
    if (options.command == "fit") return cmd_fit(options);
    if (options.command == "profile") return cmd_profile(options);
    if (options.command == "km") return cmd_km(options);
    if (options.command == "predict") return cmd_predict(options);
    if (options.command == "simulate") return cmd_simulate(options);
    if (options.command == "discriminate") return cmd_discriminate(options);
    throw std::invalid_argument("unknown command '" + options.command + "'");
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace comcure::cli
