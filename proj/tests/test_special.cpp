#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "mtm/special.hpp"

using namespace mtm::special;

TEST_CASE("normal cdf reference values") {
  CHECK(norm_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-12));
  // Φ(1.96) from the standard normal table, high-precision value
  CHECK(norm_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-10));
  CHECK(norm_cdf(-1.0) == doctest::Approx(0.15865525393145707).epsilon(1e-10));
  CHECK(norm_sf(1.0) == doctest::Approx(0.15865525393145707).epsilon(1e-10));
}

TEST_CASE("normal quantile inverts the cdf") {
  for (double p = 0.001; p < 1.0; p += 0.013) {
    double y = norm_quantile(p);
    CHECK(norm_cdf(y) == doctest::Approx(p).epsilon(1e-10));
  }
  CHECK(norm_quantile(0.5) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
}

TEST_CASE("regularized incomplete gamma against integration oracle") {
  // gamma_p(a, x) = int_0^x t^{a-1} e^{-t} dt / Gamma(a); substituting
  // t = u^2 removes the integrable singularity at 0 for a < 1
  for (double a : {0.5, 1.0, 2.5, 7.0}) {
    for (double x : {0.3, 1.0, 4.0, 11.0}) {
      double num = testutil::simpson(
          [a](double u) {
            if (u <= 0.0) return a == 0.5 ? 2.0 : 0.0;  // limit at u = 0
            return 2.0 * std::exp((2.0 * a - 1.0) * std::log(u) - u * u);
          },
          0.0, std::sqrt(x), 20000);
      double expect = num / std::tgamma(a);
      CHECK(gamma_p(a, x) == doctest::Approx(expect).epsilon(1e-7));
      CHECK(gamma_q(a, x) == doctest::Approx(1.0 - expect).epsilon(1e-7));
    }
  }
}

TEST_CASE("chi-square tail reference points") {
  // df=2 has the closed form exp(-x/2)
  CHECK(chi_square_tail(3.0, 2) == doctest::Approx(std::exp(-1.5)).epsilon(1e-12));
  // 95% critical value for df=1
  CHECK(chi_square_tail(3.841458820694124, 1) == doctest::Approx(0.05).epsilon(1e-9));
  // p-value of a large statistic on 3 df (independent scipy value)
  CHECK(chi_square_tail(21.128, 3) == doctest::Approx(9.902491708382539e-05).epsilon(1e-7));
  CHECK(chi_square_tail(0.0, 4) == doctest::Approx(1.0));
}
