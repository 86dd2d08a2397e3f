#ifndef MTM_FIT_HPP
#define MTM_FIT_HPP

#include <string>
#include <vector>

#include "mtm/likelihood.hpp"
#include "mtm/model.hpp"

namespace mtm {

struct FitResult {
  std::vector<double> theta;       // packed unconstrained optimum
  Parameters params;               // structured optimum
  std::vector<std::string> names;  // per packed slot
  std::vector<double> estimates;   // structured scale
  std::vector<double> std_errors;  // structured scale, NaN when unavailable
  double loglik = 0.0;
  double aic = 0.0;
  int n_params = 0;
  bool converged = false;
  int iterations = 0;
  double grad_norm = 0.0;
  bool se_available = false;
};

struct LrTestResult {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
};

struct ScanEntry {
  std::string covariate;
  LrTestResult test;
  double loglik_reduced = 0.0;
  bool ok = false;
  std::string error;
};

/// Moment-matched starting values: zero fixed effects, thresholds from
/// the marginal mean/sd of g(y) (or category frequencies), Cholesky
/// diagonal at 0.5.
std::vector<double> starting_values(const ModelSpec& spec, const Dataset& data);

/// Maximize the marginal log-likelihood by L-BFGS; standard errors from
/// the inverse negative numerical Hessian, delta-mapped to the
/// structured scale.
FitResult fit(const ModelSpec& spec, const Dataset& data);

/// Likelihood-ratio test of a nested pair of fits.
LrTestResult lr_test(const FitResult& full, const FitResult& reduced);

/// For each per-measurement covariate, refit with that covariate global
/// and test against the all-varying fit (df = m - 1 each).
std::vector<ScanEntry> global_vs_varying_scan(const ModelSpec& spec, const Dataset& data);

/// Standard errors for an already-located optimum (exposed for reuse by
/// the penalized path, which skips them by default).
void compute_std_errors(const Evaluator& ev, FitResult& result);

}  // namespace mtm

#endif
