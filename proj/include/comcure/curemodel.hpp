#pragma once
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "comcure/countdist.hpp"
#include "comcure/lifetime.hpp"

namespace comcure {

// Ordered moments of exposure on the study time scale; the first entry is
// the initial exposure (0 in every scheme used here).
class ExposureProfile {
 public:
  explicit ExposureProfile(std::vector<double> times);
  const std::vector<double>& times() const { return times_; }
  std::size_t count() const { return times_.size(); }

 private:
  std::vector<double> times_;
};

struct Subject {
  double time = 0.0;   // observed event or right-censoring time, > 0
  bool event = false;  // true = event observed, false = right censored
  ExposureProfile exposures;
  std::map<std::string, double> covariates;
  std::string id;
};

enum class ExposureSelector { initial_only, subsequent_only, all, explicit_set };

enum class LinkFunction { log_link, logistic };

// One regression group: which exposures it covers and which covariates
// (plus an implicit intercept) drive the group's intensity.
struct LinkGroup {
  ExposureSelector selector = ExposureSelector::all;
  std::vector<std::size_t> indices;  // explicit_set only
  std::vector<std::string> covariates;
};

struct LinkConfig {
  std::vector<LinkGroup> groups;
  LinkFunction link = LinkFunction::log_link;

  std::size_t coefficient_count() const;
  // Offset of group g's coefficient block inside the flat beta vector;
  // each block is intercept followed by the group's covariates.
  std::size_t group_offset(std::size_t g) const;
  // Group covering exposure k of an n-exposure profile. Exactly one group
  // must cover it; anything else throws.
  std::size_t group_of(std::size_t k, std::size_t n_exposures) const;
  void validate(std::size_t n_exposures) const;

  // The single shared-intensity scheme (one group, selector all).
  static LinkConfig shared(std::vector<std::string> covariates,
                           LinkFunction link = LinkFunction::log_link);
  // The two-group scheme: initial exposure vs all subsequent ones.
  static LinkConfig initial_vs_subsequent(
      std::vector<std::string> initial_covariates,
      std::vector<std::string> subsequent_covariates,
      LinkFunction link = LinkFunction::log_link);
};

// Count family (fixed, or a profile grid), link scheme, and series policy.
struct ModelSpec {
  std::vector<Dispersion> family;  // one entry = fixed; several = profile grid
  LinkConfig link;
  SeriesPolicy series;

  bool profiled() const { return family.size() > 1; }
  const Dispersion& fixed_family() const;
};

// Flat parameter block: concatenated group coefficients, then the two
// Weibull parameters.
struct ParamVector {
  std::vector<double> betas;
  double weibull_shape = 1.0;
  double weibull_scale = 1.0;

  Weibull lifetime() const { return {weibull_shape, weibull_scale}; }
  std::size_t size() const { return betas.size() + 2; }
  std::vector<double> flat() const;
  static ParamVector from_flat(std::span<const double> values);
};

// Per-exposure intensities theta_{t_k} for one subject.
std::vector<double> intensities(const Subject& subject, const ParamVector& params,
                                const LinkConfig& link);

// Population survival, density, cure probability, susceptible survival,
// and the observed-data log-likelihood.
double s_pop(double y, const Subject& subject, const ParamVector& params,
             const ModelSpec& spec);
double f_pop(double y, const Subject& subject, const ParamVector& params,
             const ModelSpec& spec);
double cure_rate(const Subject& subject, const ParamVector& params,
                 const ModelSpec& spec);
double s1(double y, const Subject& subject, const ParamVector& params,
          const ModelSpec& spec);
double observed_loglik(std::span<const Subject> data, const ParamVector& params,
                       const ModelSpec& spec);

// Parameter-independent bookkeeping for a dataset: per-subject design rows
// (laid out like the beta vector) and exposure/group assignments. Both the
// one-shot helpers above and the EM inner loop evaluate through this, so
// there is a single implementation of the model formulas.
class PreparedData {
 public:
  PreparedData(std::span<const Subject> data, const LinkConfig& link);

  struct Exposure {
    std::size_t group;
    double time;
  };
  struct Row {
    double y = 0.0;
    bool event = false;
    std::vector<Exposure> exposures;        // ascending time
    std::vector<std::size_t> group_count;   // exposures per group
    std::size_t n_active = 0;               // exposures with time < y
    std::vector<double> design;             // beta-layout covariate row
    std::string id;
  };

  const std::vector<Row>& rows() const { return rows_; }
  const LinkConfig& link() const { return link_; }
  std::size_t n_groups() const { return link_.groups.size(); }
  std::size_t n_coefficients() const { return n_coef_; }

 private:
  std::vector<Row> rows_;
  LinkConfig link_;
  std::size_t n_coef_;
};

// Reusable buffers for subject evaluation (sized to the group count).
struct EvalScratch {
  std::vector<double> theta;
  std::vector<double> log_z;
  std::vector<double> log_ratio;        // per active exposure
  std::vector<double> surv;             // shifted survival per active exposure
  std::vector<double> log_haz;          // log(f/S) per active exposure
  std::vector<std::size_t> active_in_group;
};

// Log-scale population quantities for one subject at time y. log_f_pop is
// only computed when want_density is set (it needs the weighted series).
// log_s_over_p0 is log(S_pop/p0) assembled as a sum of nonnegative log Z
// terms, so the susceptible mass S_pop - p0 keeps its relative accuracy
// even when it is many orders of magnitude below p0.
struct SubjectEval {
  double log_s_pop = 0.0;
  double log_p0 = 0.0;
  double log_f_pop = 0.0;
  double log_s_over_p0 = 0.0;
};

SubjectEval evaluate_subject(const PreparedData& prep, const PreparedData::Row& row,
                             double y, const ParamVector& params,
                             const Dispersion& family, const SeriesPolicy& policy,
                             EvalScratch& scratch, bool want_density);

}  // namespace comcure
