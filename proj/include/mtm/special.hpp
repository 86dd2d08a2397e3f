#ifndef MTM_SPECIAL_HPP
#define MTM_SPECIAL_HPP

// Scalar special functions used by the response families and the
// chi-square tail probabilities. Self-contained, no external deps.

namespace mtm::special {

/// Standard normal distribution function, computed via erfc.
double norm_cdf(double x);

/// Standard normal survival function 1 - Phi(x).
double norm_sf(double x);

/// Standard normal density.
double norm_pdf(double x);

/// Inverse of the standard normal distribution function for p in (0,1).
/// Rational approximation refined by one Newton step.
double norm_quantile(double p);

/// Regularized lower incomplete gamma P(a, x), a > 0, x >= 0.
double gamma_p(double a, double x);

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
double gamma_q(double a, double x);

/// Upper-tail probability of a chi-square distribution with df degrees
/// of freedom, P(X > x).
double chi_square_tail(double x, int df);

}  // namespace mtm::special

#endif
