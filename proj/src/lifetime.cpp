#include "comcure/lifetime.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace comcure {

Weibull::Weibull(double shape, double scale) : shape_(shape), scale_(scale) {
  if (!(shape > 0.0) || !std::isfinite(shape))
    throw std::invalid_argument("weibull shape must be positive, got " +
                                std::to_string(shape));
  if (!(scale > 0.0) || !std::isfinite(scale))
    throw std::invalid_argument("weibull scale must be positive, got " +
                                std::to_string(scale));
  log_scale_ = std::log(scale);
}

double Weibull::pdf(double y) const {
  if (y < 0.0) return 0.0;
  if (y == 0.0) {
    if (shape_ < 1.0)
      throw std::domain_error("weibull density diverges at 0 for shape < 1");
    if (shape_ == 1.0) return 1.0 / scale_;
    return 0.0;
  }
  // f = (shape/y) * H * exp(-H) with H = (y/scale)^shape
  double h = std::exp(shape_ * (std::log(y) - log_scale_));
  return shape_ / y * h * std::exp(-h);
}

double Weibull::cdf(double y) const {
  if (y <= 0.0) return 0.0;
  double h = std::exp(shape_ * (std::log(y) - log_scale_));
  return -std::expm1(-h);
}

double Weibull::survival(double y) const {
  if (y <= 0.0) return 1.0;
  double h = std::exp(shape_ * (std::log(y) - log_scale_));
  return std::exp(-h);
}

double Weibull::shifted_pdf(double y, double exposure_time) const {
  if (y <= exposure_time) return 0.0;
  return pdf(y - exposure_time);
}

double Weibull::shifted_cdf(double y, double exposure_time) const {
  if (y <= exposure_time) return 0.0;
  return cdf(y - exposure_time);
}

double Weibull::shifted_survival(double y, double exposure_time) const {
  if (y <= exposure_time) return 1.0;
  return survival(y - exposure_time);
}

}  // namespace comcure
