#include "comcure/kaplan_meier.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace comcure {

double KmCurve::survival_at(double t) const {
  double s = 1.0;
  for (const KmPoint& p : points) {
    if (p.time > t) break;
    s = p.survival;
  }
  return s;
}

KmCurve kaplan_meier(std::span<const double> times,
                     std::span<const int> status) {
  if (times.size() != status.size()) {
    throw std::invalid_argument("kaplan_meier: times and status differ in length");
  }
  if (times.empty()) {
    throw std::invalid_argument("kaplan_meier: empty sample");
  }
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!std::isfinite(times[i]) || times[i] < 0.0) {
      throw std::invalid_argument("kaplan_meier: times must be finite and nonnegative");
    }
    if (status[i] != 0 && status[i] != 1) {
      throw std::invalid_argument("kaplan_meier: status must be 0 or 1");
    }
  }

  std::vector<std::size_t> order(times.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

  KmCurve curve;
  curve.n = times.size();
  double s = 1.0;
  std::size_t at_risk = times.size();
  std::size_t i = 0;
  while (i < order.size()) {
    const double t = times[order[i]];
    std::size_t events = 0;
    std::size_t cens = 0;
    std::size_t j = i;
    while (j < order.size() && times[order[j]] == t) {
      (status[order[j]] == 1 ? events : cens) += 1;
      ++j;
    }
    if (events > 0) {
      s *= 1.0 - static_cast<double>(events) / static_cast<double>(at_risk);
    }
    curve.points.push_back({t, at_risk, events, cens, s});
    at_risk -= events + cens;
    i = j;
  }
  return curve;
}

}  // namespace comcure
