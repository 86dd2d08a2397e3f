#ifndef MTM_THRESHOLDS_HPP
#define MTM_THRESHOLDS_HPP

#include <string>
#include <string_view>
#include <vector>

namespace mtm {

enum class Basis { Linear, Log, ShiftedLog, Logit, Free };

/// Shape of the measurement-specific thresholds function
/// delta(y) = delta0 + delta * g(y), or a free set of ordered
/// thresholds for ordinal responses.
struct ThresholdsSpec {
  Basis basis = Basis::Linear;
  double a = 0.0;  // Logit lower bound
  double b = 0.0;  // Logit upper bound
  int k = 0;       // Free: number of categories (>= 2)

  static ThresholdsSpec linear() { return {Basis::Linear}; }
  static ThresholdsSpec log() { return {Basis::Log}; }
  static ThresholdsSpec shifted_log() { return {Basis::ShiftedLog}; }
  static ThresholdsSpec logit(double a, double b);
  static ThresholdsSpec free(int k);

  /// Parse "linear" | "log" | "shifted_log" | "logit(a,b)" | "free(k)".
  static ThresholdsSpec parse(std::string_view text);
  std::string name() const;

  bool is_free() const { return basis == Basis::Free; }

  /// Number of unconstrained coefficients this basis contributes
  /// (excluding a slope shared under homogeneous dispersion).
  int coeff_count() const { return is_free() ? k - 1 : 2; }
};

/// Coefficients on the structured (constrained) scale. Parametric
/// bases carry an intercept and a positive slope; the free basis a
/// strictly increasing set of k-1 thresholds.
struct ThresholdsCoeffs {
  double intercept = 0.0;
  double slope = 1.0;          // > 0
  std::vector<double> levels;  // Free: delta(1) < ... < delta(k-1)
};

/// Transformation g(y). Throws std::domain_error outside the support.
double transform(const ThresholdsSpec& spec, double y);

/// g'(y), strictly positive on the interior of the support.
double transform_deriv(const ThresholdsSpec& spec, double y);

/// delta(y) = intercept + slope * g(y) for parametric bases, or the
/// y-th ordered threshold (y in 1..k-1) for the free basis.
double eval(const ThresholdsSpec& spec, const ThresholdsCoeffs& c, double y);

/// d delta / dy = slope * g'(y). Rejects the free basis.
double deriv(const ThresholdsSpec& spec, const ThresholdsCoeffs& c, double y);

/// The unique y with eval(y) = t. Rejects the free basis.
double inverse(const ThresholdsSpec& spec, const ThresholdsCoeffs& c, double t);

/// Threshold at integer level r for a discrete measurement, with
/// -inf / +inf returned outside the covered range.
double threshold_at(const ThresholdsSpec& spec, const ThresholdsCoeffs& c, long r);

/// Integer support [rmin, rmax] of a discrete measurement; rmax may be
/// std::numeric_limits<long>::max() for unbounded counts.
struct IntSupport {
  long rmin;
  long rmax;
  bool bounded;
};
IntSupport discrete_support(const ThresholdsSpec& spec);

/// Continuous support (open interval).
struct RealSupport {
  double lo;
  double hi;
};
RealSupport continuous_support(const ThresholdsSpec& spec);

}  // namespace mtm

#endif
