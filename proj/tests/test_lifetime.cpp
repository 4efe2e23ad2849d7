#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "comcure/lifetime.hpp"

using comcure::Weibull;

TEST_CASE("closed-form values") {
  Weibull w(2.0, 3.0);
  // S(y) = exp(-(y/3)^2) at y = 1.5.
  CHECK(w.survival(1.5) == doctest::Approx(std::exp(-0.25)).epsilon(1e-15));
  CHECK(w.cdf(1.5) == doctest::Approx(1.0 - std::exp(-0.25)).epsilon(1e-15));
  // f = (shape/scale)(y/scale)^{shape-1} exp(-(y/scale)^shape) = e^{-1/4}/3.
  CHECK(w.pdf(1.5) == doctest::Approx(std::exp(-0.25) / 3.0).epsilon(1e-14));
  CHECK(w.shape() == 2.0);
  CHECK(w.scale() == 3.0);

  // Exponential special case: shape 1 is memoryless with rate 1/scale.
  Weibull e(1.0, 2.0);
  CHECK(e.survival(1.0) == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));
  CHECK(e.pdf(1.0) == doctest::Approx(0.5 * std::exp(-0.5)).epsilon(1e-14));
  CHECK(e.pdf(0.0) == 0.5);
}

TEST_CASE("support boundaries") {
  Weibull w(2.5, 1.7);
  CHECK(w.pdf(-1.0) == 0.0);
  CHECK(w.cdf(-1.0) == 0.0);
  CHECK(w.cdf(0.0) == 0.0);
  CHECK(w.survival(-1.0) == 1.0);
  CHECK(w.survival(0.0) == 1.0);
  CHECK(w.pdf(0.0) == 0.0);  // shape > 1: density starts at zero

  Weibull shallow(0.6, 1.0);
  CHECK_THROWS_AS(shallow.pdf(0.0), std::domain_error);
  CHECK(shallow.pdf(-0.5) == 0.0);  // left of the support is still zero
  CHECK(shallow.survival(0.0) == 1.0);
}

TEST_CASE("cdf and survival are complementary and monotone") {
  Weibull w(1.8, 2.4);
  double prev_s = 1.0;
  for (double y : {0.1, 0.5, 1.0, 2.0, 4.0, 9.0}) {
    CHECK(w.cdf(y) + w.survival(y) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(w.survival(y) <= prev_s);
    prev_s = w.survival(y);
    CHECK(w.pdf(y) >= 0.0);
  }
  CHECK(w.survival(1e6) == 0.0);
}

TEST_CASE("density integrates to the cdf") {
  Weibull w(2.5, 2.0);
  // Composite Simpson on [0, 3] against cdf(3).
  const int panels = 2000;
  const double a = 0.0, b = 3.0, h = (b - a) / panels;
  double acc = w.pdf(a) + w.pdf(b);
  for (int i = 1; i < panels; ++i) acc += (i % 2 ? 4.0 : 2.0) * w.pdf(a + i * h);
  acc *= h / 3.0;
  CHECK(acc == doctest::Approx(w.cdf(3.0)).epsilon(1e-9));
}

TEST_CASE("density is the negative survival derivative") {
  Weibull w(1.3, 2.2);
  for (double y : {0.3, 1.0, 2.7, 5.0}) {
    double h = 1e-6 * std::max(1.0, y);
    double fd = (w.survival(y - h) - w.survival(y + h)) / (2.0 * h);
    CHECK(w.pdf(y) == doctest::Approx(fd).epsilon(1e-7));
  }
}

TEST_CASE("shifted variants move the origin to the exposure time") {
  Weibull w(2.0, 1.5);
  const double t = 3.0;
  CHECK(w.shifted_survival(2.0, t) == 1.0);
  CHECK(w.shifted_survival(3.0, t) == 1.0);  // clock starts strictly after t
  CHECK(w.shifted_pdf(3.0, t) == 0.0);
  CHECK(w.shifted_cdf(3.0, t) == 0.0);
  for (double y : {3.2, 4.0, 6.5}) {
    CHECK(w.shifted_survival(y, t) == w.survival(y - t));
    CHECK(w.shifted_pdf(y, t) == w.pdf(y - t));
    CHECK(w.shifted_cdf(y, t) == w.cdf(y - t));
  }
  // Zero shift is the plain distribution.
  CHECK(w.shifted_survival(1.0, 0.0) == w.survival(1.0));
}

TEST_CASE("constructor validation") {
  CHECK_THROWS_AS(Weibull(0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(Weibull(-2.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(Weibull(1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(Weibull(1.0, -3.0), std::invalid_argument);
  CHECK_THROWS_AS(Weibull(std::nan(""), 1.0), std::invalid_argument);
  CHECK_THROWS_AS(Weibull(1.0, std::numeric_limits<double>::infinity()),
                  std::invalid_argument);
}
