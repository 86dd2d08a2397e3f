#ifndef MTM_PENALTY_HPP
#define MTM_PENALTY_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "mtm/fit.hpp"
#include "mtm/model.hpp"

namespace mtm {

/// Fusion + selection penalty on per-measurement coefficient blocks:
/// lambda * sum_s (||d_s||_eps + ||beta_.s||_eps) where d_s stacks the
/// pairwise differences within block s and ||v||_eps = sqrt(v'v+eps^2)-eps
/// is the smoothed group norm (exactly 0 at v = 0).
struct PenaltySpec {
  double lambda = 0.0;
  double epsilon = 1e-4;
  bool adjacent_only = false;  // default: all m(m-1)/2 pairwise differences
  // Names of the penalized covariates; empty = every PerMeasurement
  // covariate. Global blocks, thresholds and the Cholesky factor are
  // never penalized.
  std::vector<std::string> covariates;
};

/// Smoothed group norm ||v||_eps = sqrt(v'v + eps^2) - eps.
double smoothed_norm(const std::vector<double>& v, double eps);

/// Penalty value at a packed parameter vector.
double penalty_value(const ParamLayout& layout, const std::vector<double>& theta,
                     const PenaltySpec& pspec);

/// Penalty value plus its gradient (accumulated into grad, which must
/// already have layout.size() entries).
double penalty_value_grad(const ParamLayout& layout, const std::vector<double>& theta,
                          const PenaltySpec& pspec, std::vector<double>& grad);

/// Maximizes loglik - penalty with the same quasi-Newton machinery as
/// fit(). Standard errors are not computed (se_available = false);
/// FitResult.loglik holds the unpenalized log-likelihood at the
/// penalized optimum.
FitResult fit_penalized(const ModelSpec& spec, const Dataset& data, const PenaltySpec& pspec);

struct FusionDiag {
  std::string covariate;
  double max_pair_diff = 0.0;  // max |beta_aj - beta_bj| within the block
  double block_norm = 0.0;     // L2 norm of the block
  bool fused = false;          // max_pair_diff < 0.05 * max(block RMS, 1)
};

struct PathEntry {
  double lambda = 0.0;
  FitResult fit;
  std::vector<FusionDiag> diag;
  double objective = 0.0;  // penalized objective (-loglik + penalty)
  bool ok = false;
  std::string error;
};

struct PathResult {
  std::vector<double> lambdas;
  std::vector<PathEntry> entries;
  // Filled by cross_validate: per-lambda mean and standard error of the
  // held-out negative log-likelihood per cluster.
  std::vector<double> cv_loss;
  std::vector<double> cv_se;
  int best_index = -1;  // argmin cv_loss; -1 when CV was not run
};

/// Default grid: 40 points with log(1+lambda) equally spaced in [0, 6].
std::vector<double> default_lambda_grid();

/// Sequential penalized fits over an increasing lambda grid starting at
/// 0, warm-starting each fit from the previous solution. Per-lambda
/// failures are recorded and the path continues from the last good
/// solution.
PathResult path(const ModelSpec& spec, const Dataset& data, const std::vector<double>& lambda_grid,
                const PenaltySpec& pspec);

/// Cluster-wise k-fold cross-validation over the lambda grid. Clusters
/// are shuffled with a seeded mt19937_64 and dealt round-robin into
/// folds; deterministic for a fixed seed.
PathResult cross_validate(const ModelSpec& spec, const Dataset& data,
                          const std::vector<double>& lambda_grid, int folds, std::uint64_t seed,
                          const PenaltySpec& pspec);

/// Fusion diagnostics of the per-measurement blocks at a fitted point.
std::vector<FusionDiag> fusion_diagnostics(const ParamLayout& layout,
                                           const std::vector<double>& theta,
                                           const PenaltySpec& pspec);

}  // namespace mtm

#endif
