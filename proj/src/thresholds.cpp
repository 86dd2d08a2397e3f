#include "mtm/thresholds.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace mtm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

[[noreturn]] void support_error(const char* what, double y) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "y = %g outside support: requires %s", y, what);
  throw std::domain_error(buf);
}

}  // namespace

ThresholdsSpec ThresholdsSpec::logit(double a, double b) {
  if (!(a < b)) throw std::invalid_argument("logit thresholds require a < b");
  ThresholdsSpec s;
  s.basis = Basis::Logit;
  s.a = a;
  s.b = b;
  return s;
}

ThresholdsSpec ThresholdsSpec::free(int k) {
  if (k < 2) throw std::invalid_argument("free thresholds require k >= 2 categories");
  ThresholdsSpec s;
  s.basis = Basis::Free;
  s.k = k;
  return s;
}

ThresholdsSpec ThresholdsSpec::parse(std::string_view text) {
  std::string t(text);
  if (t == "linear") return linear();
  if (t == "log") return log();
  if (t == "shifted_log") return shifted_log();
  double a, b;
  int k;
  if (std::sscanf(t.c_str(), "logit(%lf,%lf)", &a, &b) == 2) return logit(a, b);
  if (std::sscanf(t.c_str(), "free(%d)", &k) == 1) return free(k);
  throw std::invalid_argument("unknown thresholds basis \"" + t +
                              "\" (expected linear|log|shifted_log|logit(a,b)|free(k))");
}

std::string ThresholdsSpec::name() const {
  char buf[64];
  switch (basis) {
    case Basis::Linear: return "linear";
    case Basis::Log: return "log";
    case Basis::ShiftedLog: return "shifted_log";
    case Basis::Logit:
      std::snprintf(buf, sizeof buf, "logit(%g,%g)", a, b);
      return buf;
    case Basis::Free:
      std::snprintf(buf, sizeof buf, "free(%d)", k);
      return buf;
  }
  return "?";
}

double transform(const ThresholdsSpec& spec, double y) {
  switch (spec.basis) {
    case Basis::Linear:
      return y;
    case Basis::Log:
      if (!(y > 0.0)) support_error("y > 0", y);
      return std::log(y);
    case Basis::ShiftedLog:
      if (!(y > -1.0)) support_error("y > -1", y);
      return std::log1p(y);
    case Basis::Logit:
      if (!(y > spec.a && y < spec.b)) support_error("a < y < b", y);
      return std::log((y - spec.a) / (spec.b - y));
    case Basis::Free:
      throw std::logic_error("transform: free basis has no transformation function");
  }
  return 0.0;
}

double transform_deriv(const ThresholdsSpec& spec, double y) {
  switch (spec.basis) {
    case Basis::Linear:
      return 1.0;
    case Basis::Log:
      if (!(y > 0.0)) support_error("y > 0", y);
      return 1.0 / y;
    case Basis::ShiftedLog:
      if (!(y > -1.0)) support_error("y > -1", y);
      return 1.0 / (1.0 + y);
    case Basis::Logit:
      if (!(y > spec.a && y < spec.b)) support_error("a < y < b", y);
      return (spec.b - spec.a) / ((y - spec.a) * (spec.b - y));
    case Basis::Free:
      throw std::logic_error("transform_deriv: free basis is discrete");
  }
  return 0.0;
}

double eval(const ThresholdsSpec& spec, const ThresholdsCoeffs& c, double y) {
  if (spec.is_free()) {
    long r = std::lround(y);
    if (r < 1 || r > spec.k - 1 || std::fabs(y - r) > 1e-9)
      support_error("y in {1..k-1}", y);
    return c.levels[static_cast<size_t>(r - 1)];
  }
  return c.intercept + c.slope * transform(spec, y);
}

double deriv(const ThresholdsSpec& spec, const ThresholdsCoeffs& c, double y) {
  if (spec.is_free())
    throw std::logic_error("deriv: unsupported for the free basis (discrete support)");
  return c.slope * transform_deriv(spec, y);
}

double inverse(const ThresholdsSpec& spec, const ThresholdsCoeffs& c, double t) {
  if (spec.is_free())
    throw std::logic_error("inverse: unsupported for the free basis (discrete support)");
  if (!std::isfinite(t)) throw std::domain_error("inverse: non-finite argument");
  double u = (t - c.intercept) / c.slope;
  switch (spec.basis) {
    case Basis::Linear:
      return u;
    case Basis::Log:
      return std::exp(u);
    case Basis::ShiftedLog:
      return std::expm1(u);
    case Basis::Logit: {
      // (a + b e^u) / (1 + e^u), evaluated from the stable side
      if (u >= 0.0) {
        double e = std::exp(-u);
        return (spec.a * e + spec.b) / (1.0 + e);
      }
      double e = std::exp(u);
      return (spec.a + spec.b * e) / (1.0 + e);
    }
    case Basis::Free:
      break;
  }
  return 0.0;
}

double threshold_at(const ThresholdsSpec& spec, const ThresholdsCoeffs& c, long r) {
  if (spec.is_free()) {
    if (r < 1) return -kInf;
    if (r > spec.k - 1) return kInf;
    return c.levels[static_cast<size_t>(r - 1)];
  }
  switch (spec.basis) {
    case Basis::Log:
      if (r <= 0) return -kInf;
      break;
    case Basis::ShiftedLog:
      if (r <= -1) return -kInf;
      break;
    case Basis::Logit:
      if (r <= spec.a) return -kInf;
      if (r >= spec.b) return kInf;
      break;
    default:
      break;
  }
  return c.intercept + c.slope * transform(spec, static_cast<double>(r));
}

IntSupport discrete_support(const ThresholdsSpec& spec) {
  constexpr long unbounded = std::numeric_limits<long>::max();
  switch (spec.basis) {
    case Basis::ShiftedLog:
      return {0, unbounded, false};
    case Basis::Log:
      return {1, unbounded, false};
    case Basis::Logit: {
      long lo = static_cast<long>(std::floor(spec.a)) + 1;
      long hi = static_cast<long>(std::ceil(spec.b));
      return {lo, hi, true};
    }
    case Basis::Free:
      return {1, spec.k, true};
    case Basis::Linear:
      throw std::invalid_argument("linear thresholds are not usable with a discrete response");
  }
  return {0, unbounded, false};
}

RealSupport continuous_support(const ThresholdsSpec& spec) {
  switch (spec.basis) {
    case Basis::Linear:
      return {-kInf, kInf};
    case Basis::Log:
      return {0.0, kInf};
    case Basis::ShiftedLog:
      return {-1.0, kInf};
    case Basis::Logit:
      return {spec.a, spec.b};
    case Basis::Free:
      throw std::invalid_argument("free thresholds are not usable with a continuous response");
  }
  return {-kInf, kInf};
}

}  // namespace mtm
