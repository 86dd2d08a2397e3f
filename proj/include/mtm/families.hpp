#ifndef MTM_FAMILIES_HPP
#define MTM_FAMILIES_HPP

#include <string>
#include <string_view>

namespace mtm {

/// The response function F: a strictly increasing distribution function
/// on the real line. Gumbel is the max-extreme-value law
/// F(y) = exp(-exp(-y)); Gompertz the min-extreme-value law
/// F(y) = 1 - exp(-exp(y)).
enum class Family { Normal, Logistic, Gumbel, Gompertz };

Family family_from_name(std::string_view name);
std::string family_name(Family f);

/// Distribution function F(y). Arguments with |y| > 40 are clamped to
/// 0/1; non-finite input raises a domain error.
double cdf(Family f, double y);

/// Survival function 1 - F(y), computed without cancellation.
double sf(Family f, double y);

/// Density f(y) = dF/dy.
double pdf(Family f, double y);

/// log f(y), stable far into the tails.
double log_pdf(Family f, double y);

/// d log f(y) / dy (the location score, used by the likelihood gradient).
double log_pdf_deriv(Family f, double y);

/// Inverse of the distribution function for p in (0,1).
double quantile(Family f, double p);

struct Moments {
  double mean;
  double variance;
};

/// Mean and variance of the density f.
Moments moments(Family f);

/// F(hi) - F(lo) for hi >= lo, avoiding cancellation in either tail.
double cdf_diff(Family f, double lo, double hi);

}  // namespace mtm

#endif
