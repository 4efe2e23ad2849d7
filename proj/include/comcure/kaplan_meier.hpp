#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace comcure {

// One step of the product-limit curve: at `time`, `at_risk` subjects were
// still under observation, `events` of them failed, and `survival` is the
// estimate just after the step.
struct KmPoint {
  double time = 0.0;
  std::size_t at_risk = 0;
  std::size_t events = 0;
  std::size_t censored = 0;
  double survival = 1.0;
};

struct KmCurve {
  std::vector<KmPoint> points;  // one per distinct observed time, ascending
  std::size_t n = 0;

  // Step-function lookup: estimate of S(t), 1 before the first point.
  double survival_at(double t) const;
};

// Standard Kaplan-Meier product-limit estimator. Ties between events and
// censorings at the same time follow the usual convention: events happen
// first, censored subjects still count as at risk at that time.
KmCurve kaplan_meier(std::span<const double> times,
                     std::span<const int> status);

}  // namespace comcure
