#include "comcure/curemodel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace comcure {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

ExposureProfile::ExposureProfile(std::vector<double> times)
    : times_(std::move(times)) {
  if (times_.empty())
    throw std::invalid_argument("exposure profile must contain at least one time");
  if (times_.front() < 0.0)
    throw std::invalid_argument("exposure times must be >= 0");
  for (std::size_t k = 1; k < times_.size(); ++k)
    if (!(times_[k] > times_[k - 1]))
      throw std::invalid_argument("exposure times must be strictly increasing");
}

std::size_t LinkConfig::coefficient_count() const {
  std::size_t n = 0;
  for (const auto& g : groups) n += 1 + g.covariates.size();
  return n;
}

std::size_t LinkConfig::group_offset(std::size_t g) const {
  std::size_t off = 0;
  for (std::size_t i = 0; i < g; ++i) off += 1 + groups[i].covariates.size();
  return off;
}

namespace {
bool group_covers(const LinkGroup& g, std::size_t k, std::size_t n) {
  switch (g.selector) {
    case ExposureSelector::initial_only:
      return k == 0;
    case ExposureSelector::subsequent_only:
      return k >= 1 && k < n;
    case ExposureSelector::all:
      return k < n;
    case ExposureSelector::explicit_set:
      return std::find(g.indices.begin(), g.indices.end(), k) != g.indices.end();
  }
  return false;
}
}  // namespace

std::size_t LinkConfig::group_of(std::size_t k, std::size_t n_exposures) const {
  std::size_t found = groups.size();
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (group_covers(groups[g], k, n_exposures)) {
      if (found != groups.size())
        throw std::invalid_argument(
            "link config: exposure index " + std::to_string(k) +
            " is covered by more than one group");
      found = g;
    }
  }
  if (found == groups.size())
    throw std::invalid_argument("link config: exposure index " +
                                std::to_string(k) + " is covered by no group");
  return found;
}

void LinkConfig::validate(std::size_t n_exposures) const {
  if (groups.empty())
    throw std::invalid_argument("link config must contain at least one group");
  for (std::size_t k = 0; k < n_exposures; ++k) group_of(k, n_exposures);
}

LinkConfig LinkConfig::shared(std::vector<std::string> covariates,
                              LinkFunction link) {
  LinkConfig cfg;
  cfg.link = link;
  cfg.groups.push_back({ExposureSelector::all, {}, std::move(covariates)});
  return cfg;
}

LinkConfig LinkConfig::initial_vs_subsequent(
    std::vector<std::string> initial_covariates,
    std::vector<std::string> subsequent_covariates, LinkFunction link) {
  LinkConfig cfg;
  cfg.link = link;
  cfg.groups.push_back(
      {ExposureSelector::initial_only, {}, std::move(initial_covariates)});
  cfg.groups.push_back(
      {ExposureSelector::subsequent_only, {}, std::move(subsequent_covariates)});
  return cfg;
}

const Dispersion& ModelSpec::fixed_family() const {
  if (family.size() != 1)
    throw std::logic_error(
        "model spec holds a profile grid; a single fixed family is required here");
  return family.front();
}

std::vector<double> ParamVector::flat() const {
  std::vector<double> v = betas;
  v.push_back(weibull_shape);
  v.push_back(weibull_scale);
  return v;
}

ParamVector ParamVector::from_flat(std::span<const double> values) {
  if (values.size() < 2)
    throw std::invalid_argument("flat parameter vector needs at least the two "
                                "weibull entries");
  ParamVector p;
  p.betas.assign(values.begin(), values.end() - 2);
  p.weibull_shape = values[values.size() - 2];
  p.weibull_scale = values[values.size() - 1];
  return p;
}

PreparedData::PreparedData(std::span<const Subject> data, const LinkConfig& link)
    : link_(link), n_coef_(link.coefficient_count()) {
  if (link_.groups.empty())
    throw std::invalid_argument("link config must contain at least one group");
  rows_.reserve(data.size());
  for (const Subject& s : data) {
    if (!(s.time > 0.0))
      throw std::invalid_argument("subject " + s.id +
                                  ": observed time must be > 0");
    Row row;
    row.y = s.time;
    row.event = s.event;
    row.id = s.id;
    const auto& times = s.exposures.times();
    row.exposures.reserve(times.size());
    row.group_count.assign(link_.groups.size(), 0);
    for (std::size_t k = 0; k < times.size(); ++k) {
      std::size_t g = link_.group_of(k, times.size());
      row.exposures.push_back({g, times[k]});
      ++row.group_count[g];
    }
    row.n_active = 0;
    while (row.n_active < times.size() && times[row.n_active] < row.y)
      ++row.n_active;
    row.design.assign(n_coef_, 0.0);
    for (std::size_t g = 0; g < link_.groups.size(); ++g) {
      std::size_t off = link_.group_offset(g);
      row.design[off] = 1.0;  // intercept
      const auto& covs = link_.groups[g].covariates;
      for (std::size_t j = 0; j < covs.size(); ++j) {
        auto it = s.covariates.find(covs[j]);
        if (it == s.covariates.end())
          throw std::invalid_argument("subject " + s.id +
                                      ": missing covariate '" + covs[j] + "'");
        row.design[off + 1 + j] = it->second;
      }
    }
    rows_.push_back(std::move(row));
  }
}

SubjectEval evaluate_subject(const PreparedData& prep, const PreparedData::Row& row,
                             double y, const ParamVector& params,
                             const Dispersion& family, const SeriesPolicy& policy,
                             EvalScratch& scratch, bool want_density) {
  const LinkConfig& link = prep.link();
  const std::size_t n_groups = prep.n_groups();
  scratch.theta.resize(n_groups);
  scratch.log_z.resize(n_groups);

  for (std::size_t g = 0; g < n_groups; ++g) {
    std::size_t off = link.group_offset(g);
    std::size_t len = 1 + link.groups[g].covariates.size();
    double eta = 0.0;
    for (std::size_t j = 0; j < len; ++j)
      eta += row.design[off + j] * params.betas[off + j];
    double theta = link.link == LinkFunction::logistic
                       ? 1.0 / (1.0 + std::exp(-eta))
                       : std::exp(eta);
    scratch.theta[g] = theta;
    scratch.log_z[g] = row.group_count[g] == 0
                           ? 0.0
                           : log_normalizing_constant(theta, family, policy);
  }

  SubjectEval out;
  for (std::size_t g = 0; g < n_groups; ++g)
    out.log_p0 -= static_cast<double>(row.group_count[g]) * scratch.log_z[g];

  // Exposure times are ascending, so the active set is a prefix.
  std::size_t n_active = row.n_active;
  if (y != row.y) {
    n_active = 0;
    while (n_active < row.exposures.size() && row.exposures[n_active].time < y)
      ++n_active;
  }

  scratch.log_ratio.resize(n_active);
  scratch.surv.resize(n_active);
  scratch.log_haz.resize(n_active);
  scratch.active_in_group.assign(n_groups, 0);
  const double shape = params.weibull_shape;
  const double log_scale = std::log(params.weibull_scale);

  for (std::size_t k = 0; k < n_active; ++k) {
    const auto& e = row.exposures[k];
    double u = y - e.time;  // > 0 for active exposures
    double log_u = std::log(u);
    double log_h = shape * (log_u - log_scale);
    double s = std::exp(-std::exp(log_h));
    scratch.surv[k] = s;
    scratch.log_haz[k] = std::log(shape) + log_h - log_u;  // log(f/S)
    double lz_s =
        log_normalizing_constant(scratch.theta[e.group] * s, family, policy);
    scratch.log_ratio[k] = lz_s - scratch.log_z[e.group];
    out.log_s_pop += scratch.log_ratio[k];
    out.log_s_over_p0 += lz_s;
    ++scratch.active_in_group[e.group];
  }
  // Inactive exposures have shifted survival 1, so their ratio is 1 (and
  // they contribute a full log Z to S_pop/p0).
  for (std::size_t g = 0; g < n_groups; ++g)
    out.log_s_over_p0 +=
        static_cast<double>(row.group_count[g] - scratch.active_in_group[g]) *
        scratch.log_z[g];

  if (want_density) {
    double f = 0.0;
    for (std::size_t k = 0; k < n_active; ++k) {
      const auto& e = row.exposures[k];
      double lw = log_weighted_series(scratch.surv[k], scratch.theta[e.group],
                                      family, policy);
      if (lw == -kInf) continue;
      double log_term = lw - scratch.log_z[e.group] + scratch.log_haz[k] +
                        (out.log_s_pop - scratch.log_ratio[k]);
      f += std::exp(log_term);
    }
    out.log_f_pop = f > 0.0 ? std::log(f) : -kInf;
  }
  return out;
}

namespace {
// One-subject evaluation for the public helpers; the link is validated and
// the design row built exactly as in the dataset path.
SubjectEval evaluate_one(double y, const Subject& subject,
                         const ParamVector& params, const ModelSpec& spec,
                         bool want_density) {
  PreparedData prep({&subject, 1}, spec.link);
  if (params.betas.size() != prep.n_coefficients())
    throw std::invalid_argument("parameter vector has " +
                                std::to_string(params.betas.size()) +
                                " coefficients; link config requires " +
                                std::to_string(prep.n_coefficients()));
  EvalScratch scratch;
  return evaluate_subject(prep, prep.rows().front(), y, params,
                          spec.fixed_family(), spec.series, scratch,
                          want_density);
}
}  // namespace

std::vector<double> intensities(const Subject& subject, const ParamVector& params,
                                const LinkConfig& link) {
  PreparedData prep({&subject, 1}, link);
  if (params.betas.size() != prep.n_coefficients())
    throw std::invalid_argument("parameter vector size does not match link config");
  const auto& row = prep.rows().front();
  std::vector<double> theta_g(link.groups.size());
  for (std::size_t g = 0; g < link.groups.size(); ++g) {
    std::size_t off = link.group_offset(g);
    std::size_t len = 1 + link.groups[g].covariates.size();
    double eta = 0.0;
    for (std::size_t j = 0; j < len; ++j)
      eta += row.design[off + j] * params.betas[off + j];
    theta_g[g] = link.link == LinkFunction::logistic
                     ? 1.0 / (1.0 + std::exp(-eta))
                     : std::exp(eta);
  }
  std::vector<double> out(row.exposures.size());
  for (std::size_t k = 0; k < row.exposures.size(); ++k)
    out[k] = theta_g[row.exposures[k].group];
  return out;
}

double s_pop(double y, const Subject& subject, const ParamVector& params,
             const ModelSpec& spec) {
  return std::exp(evaluate_one(y, subject, params, spec, false).log_s_pop);
}

double f_pop(double y, const Subject& subject, const ParamVector& params,
             const ModelSpec& spec) {
  SubjectEval ev = evaluate_one(y, subject, params, spec, true);
  return ev.log_f_pop == -kInf ? 0.0 : std::exp(ev.log_f_pop);
}

double cure_rate(const Subject& subject, const ParamVector& params,
                 const ModelSpec& spec) {
  return std::exp(evaluate_one(subject.time, subject, params, spec, false).log_p0);
}

double s1(double y, const Subject& subject, const ParamVector& params,
          const ModelSpec& spec) {
  SubjectEval ev = evaluate_one(y, subject, params, spec, false);
  double denom = -std::expm1(ev.log_p0);  // 1 - p0
  if (denom < 1e-12)
    throw std::domain_error("subject " + subject.id +
                            ": cure probability is 1 within tolerance; the "
                            "susceptible survival is undefined");
  // (S_pop - p0)/(1 - p0) with the numerator factored through S_pop/p0 to
  // dodge the subtraction of nearly equal survival values.
  double value = std::exp(ev.log_s_pop) * -std::expm1(-ev.log_s_over_p0) / denom;
  return std::clamp(value, 0.0, 1.0);
}

double observed_loglik(std::span<const Subject> data, const ParamVector& params,
                       const ModelSpec& spec) {
  PreparedData prep(data, spec.link);
  if (!data.empty() && params.betas.size() != prep.n_coefficients())
    throw std::invalid_argument("parameter vector size does not match link config");
  const Dispersion& family = spec.fixed_family();
  EvalScratch scratch;
  double sum = 0.0;
  for (const auto& row : prep.rows()) {
    SubjectEval ev = evaluate_subject(prep, row, row.y, params, family,
                                      spec.series, scratch, row.event);
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

}  // namespace comcure
