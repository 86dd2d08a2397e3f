#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "mtm/families.hpp"

using namespace mtm;

static const Family kAll[] = {Family::Normal, Family::Logistic, Family::Gumbel, Family::Gompertz};

TEST_CASE("cdf reference points") {
  CHECK(cdf(Family::Normal, 0.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(cdf(Family::Gumbel, 0.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(cdf(Family::Gompertz, 0.0) == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-12));
  CHECK(cdf(Family::Logistic, 0.0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("pdf reference points and finite-difference consistency") {
  CHECK(pdf(Family::Normal, 0.0) == doctest::Approx(0.3989422804014327).epsilon(1e-12));
  CHECK(pdf(Family::Logistic, 0.0) == doctest::Approx(0.25).epsilon(1e-12));
  const double h = 1e-5;
  for (Family f : kAll)
    for (double y = -8.0; y <= 8.0; y += 0.37) {
      double fd = (cdf(f, y + h) - cdf(f, y - h)) / (2 * h);
      CHECK(pdf(f, y) == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
    }
}

TEST_CASE("pdf integrates to one") {
  for (Family f : kAll) {
    double mass = testutil::simpson([f](double y) { return pdf(f, y); }, -40.0, 40.0, 40000);
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-8));
  }
}

TEST_CASE("quantile inverts cdf") {
  CHECK(quantile(Family::Normal, 0.5) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(quantile(Family::Gumbel, std::exp(-1.0)) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(quantile(Family::Logistic, 0.75) == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  for (Family f : kAll)
    for (double p = 0.01; p < 1.0; p += 0.01)
      CHECK(cdf(f, quantile(f, p)) == doctest::Approx(p).epsilon(1e-10));
}

TEST_CASE("moments match the integration oracle") {
  for (Family f : kAll) {
    double mean = testutil::simpson([f](double y) { return y * pdf(f, y); }, -40.0, 40.0, 40000);
    double var = testutil::simpson(
        [f, mean](double y) { return (y - mean) * (y - mean) * pdf(f, y); }, -40.0, 40.0, 40000);
    auto mom = moments(f);
    CHECK(mom.mean == doctest::Approx(mean).epsilon(1e-8).scale(1.0));
    CHECK(mom.variance == doctest::Approx(var).epsilon(1e-8));
  }
}

TEST_CASE("log_pdf_deriv is the derivative of log_pdf") {
  const double h = 1e-6;
  for (Family f : kAll)
    for (double y = -6.0; y <= 6.0; y += 0.41) {
      double fd = (log_pdf(f, y + h) - log_pdf(f, y - h)) / (2 * h);
      CHECK(log_pdf_deriv(f, y) == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
    }
}

TEST_CASE("cdf_diff is accurate in both tails") {
  for (Family f : kAll) {
    // far right tail: naive cdf difference would cancel
    double d = cdf_diff(f, 20.0, 20.5);
    double oracle = testutil::simpson([f](double y) { return pdf(f, y); }, 20.0, 20.5, 2000);
    CHECK(d == doctest::Approx(oracle).epsilon(1e-6));
    double dl = cdf_diff(f, -20.5, -20.0);
    double oracle_l = testutil::simpson([f](double y) { return pdf(f, y); }, -20.5, -20.0, 2000);
    CHECK(dl == doctest::Approx(oracle_l).epsilon(1e-6));
  }
  CHECK_THROWS_AS(cdf_diff(Family::Normal, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("family names round trip") {
  for (Family f : kAll) CHECK(family_from_name(family_name(f)) == f);
  CHECK_THROWS_AS(family_from_name("cauchy"), std::invalid_argument);
}

TEST_CASE("non-finite arguments are rejected") {
  CHECK_THROWS_AS(cdf(Family::Normal, std::nan("")), std::domain_error);
  CHECK_THROWS_AS(pdf(Family::Gumbel, INFINITY), std::domain_error);
  CHECK_THROWS_AS(quantile(Family::Normal, 0.0), std::domain_error);
  CHECK_THROWS_AS(quantile(Family::Normal, 1.0), std::domain_error);
}
