#pragma once

namespace comcure {

// Weibull promotion-time distribution, plus the shifted variants used on
// the study time scale where an exposure at time t only starts its clock
// at t. Parameterized so the survival is exp(-(y/scale)^shape).
class Weibull {
 public:
  Weibull(double shape, double scale);

  double shape() const { return shape_; }
  double scale() const { return scale_; }

  // Density at y >= 0. For shape < 1 the density diverges at 0, so y = 0
  // raises std::domain_error rather than returning infinity.
  double pdf(double y) const;
  double cdf(double y) const;
  double survival(double y) const;

  // Variants with the origin moved to exposure_time: mass only after the
  // exposure. At or before it, survival is 1 and density/cdf are 0.
  double shifted_pdf(double y, double exposure_time) const;
  double shifted_cdf(double y, double exposure_time) const;
  double shifted_survival(double y, double exposure_time) const;

 private:
  double shape_;
  double scale_;
  double log_scale_;
};

}  // namespace comcure
