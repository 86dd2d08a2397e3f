#include "mtm/families.hpp"

#include <cmath>
#include <stdexcept>

#include "mtm/special.hpp"

namespace mtm {

namespace {

constexpr double kClamp = 40.0;
constexpr double kEulerGamma = 0.5772156649015329;
constexpr double kPi2Over3 = 3.2898681336964524;
constexpr double kPi2Over6 = 1.6449340668482264;

void check_finite(double y, const char* op) {
  if (!std::isfinite(y)) throw std::domain_error(std::string(op) + ": non-finite argument");
}

}  // namespace

Family family_from_name(std::string_view name) {
  if (name == "normal") return Family::Normal;
  if (name == "logistic") return Family::Logistic;
  if (name == "gumbel") return Family::Gumbel;
  if (name == "gompertz") return Family::Gompertz;
  throw std::invalid_argument("unknown response family \"" + std::string(name) +
                              "\" (expected normal|logistic|gumbel|gompertz)");
}

std::string family_name(Family f) {
  switch (f) {
    case Family::Normal: return "normal";
    case Family::Logistic: return "logistic";
    case Family::Gumbel: return "gumbel";
    case Family::Gompertz: return "gompertz";
  }
  return "?";
}

double cdf(Family f, double y) {
  check_finite(y, "cdf");
  if (y > kClamp) return 1.0;
  if (y < -kClamp) return 0.0;
  switch (f) {
    case Family::Normal: return special::norm_cdf(y);
    case Family::Logistic: return 1.0 / (1.0 + std::exp(-y));
    case Family::Gumbel: return std::exp(-std::exp(-y));
    case Family::Gompertz: return -std::expm1(-std::exp(y));
  }
  return 0.0;
}

double sf(Family f, double y) {
  check_finite(y, "sf");
  if (y > kClamp) return 0.0;
  if (y < -kClamp) return 1.0;
  switch (f) {
    case Family::Normal: return special::norm_sf(y);
    case Family::Logistic: return 1.0 / (1.0 + std::exp(y));
    case Family::Gumbel: return -std::expm1(-std::exp(-y));
    case Family::Gompertz: return std::exp(-std::exp(y));
  }
  return 0.0;
}

double pdf(Family f, double y) {
  check_finite(y, "pdf");
  if (std::fabs(y) > kClamp) return 0.0;
  return std::exp(log_pdf(f, y));
}

double log_pdf(Family f, double y) {
  check_finite(y, "log_pdf");
  switch (f) {
    case Family::Normal:
      return -0.5 * y * y - 0.9189385332046727;  // log sqrt(2 pi)
    case Family::Logistic: {
      double a = std::fabs(y);
      return -a - 2.0 * std::log1p(std::exp(-a));
    }
    case Family::Gumbel: return -y - std::exp(-y);
    case Family::Gompertz: return y - std::exp(y);
  }
  return 0.0;
}

double log_pdf_deriv(Family f, double y) {
  check_finite(y, "log_pdf_deriv");
  switch (f) {
    case Family::Normal: return -y;
    case Family::Logistic: return 1.0 - 2.0 * cdf(Family::Logistic, y);
    case Family::Gumbel: return -1.0 + std::exp(-std::min(y, kClamp));
    case Family::Gompertz: return 1.0 - std::exp(std::min(y, kClamp));
  }
  return 0.0;
}

double quantile(Family f, double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("quantile: p must be in (0,1)");
  switch (f) {
    case Family::Normal: return special::norm_quantile(p);
    case Family::Logistic: return std::log(p / (1.0 - p));
    case Family::Gumbel: return -std::log(-std::log(p));
    case Family::Gompertz: return std::log(-std::log1p(-p));
  }
  return 0.0;
}

Moments moments(Family f) {
  switch (f) {
    case Family::Normal: return {0.0, 1.0};
    case Family::Logistic: return {0.0, kPi2Over3};
    case Family::Gumbel: return {kEulerGamma, kPi2Over6};
    case Family::Gompertz: return {-kEulerGamma, kPi2Over6};
  }
  return {0.0, 1.0};
}

double cdf_diff(Family f, double lo, double hi) {
  if (hi < lo) throw std::invalid_argument("cdf_diff: hi < lo");
  double d;
  if (lo + hi >= 0.0) {
    d = sf(f, lo) - sf(f, hi);
  } else {
    d = cdf(f, hi) - cdf(f, lo);
  }
  return d > 0.0 ? d : 0.0;
}

}  // namespace mtm
