#include "mtm/penalty.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "mtm/lbfgs.hpp"
#include "mtm/likelihood.hpp"

namespace mtm {

namespace {

// Packed indices of the penalized blocks: one vector of m slots per
// penalized covariate.
struct PenalizedBlocks {
  std::vector<int> covariate;             // spec covariate index
  std::vector<std::vector<int>> slots;    // packed indices, length m each
};

PenalizedBlocks resolve_blocks(const ParamLayout& layout, const PenaltySpec& pspec) {
  const ModelSpec& spec = layout.spec();
  const int m = spec.n_measurements();
  PenalizedBlocks out;
  for (int s = 0; s < spec.n_covariates(); ++s) {
    const auto& cov = spec.covariates[static_cast<size_t>(s)];
    if (cov.scope != Scope::PerMeasurement) continue;
    if (!pspec.covariates.empty() &&
        std::find(pspec.covariates.begin(), pspec.covariates.end(), cov.name) ==
            pspec.covariates.end())
      continue;
    std::vector<int> slots(static_cast<size_t>(m));
    for (int j = 0; j < m; ++j) slots[static_cast<size_t>(j)] = layout.beta_index(s, j);
    out.covariate.push_back(s);
    out.slots.push_back(std::move(slots));
  }
  if (!pspec.covariates.empty()) {
    for (const auto& name : pspec.covariates) {
      bool found = false;
      for (int s : out.covariate)
        found = found || spec.covariates[static_cast<size_t>(s)].name == name;
      if (!found)
        throw std::invalid_argument("penalty: covariate \"" + name +
                                    "\" is not a per-measurement covariate of the model");
    }
  }
  return out;
}

// Differences within one block (all pairs or adjacent), as index pairs.
std::vector<std::pair<int, int>> difference_pairs(int m, bool adjacent_only) {
  std::vector<std::pair<int, int>> pairs;
  if (adjacent_only) {
    for (int j = 0; j + 1 < m; ++j) pairs.emplace_back(j, j + 1);
  } else {
    for (int a = 0; a < m; ++a)
      for (int b = a + 1; b < m; ++b) pairs.emplace_back(a, b);
  }
  return pairs;
}

}  // namespace

double smoothed_norm(const std::vector<double>& v, double eps) {
  double ss = 0.0;
  for (double x : v) ss += x * x;
  if (ss == 0.0) return 0.0;
  return std::sqrt(ss + eps * eps) - eps;
}

double penalty_value(const ParamLayout& layout, const std::vector<double>& theta,
                     const PenaltySpec& pspec) {
  if (pspec.lambda == 0.0) return 0.0;
  auto blocks = resolve_blocks(layout, pspec);
  const int m = layout.spec().n_measurements();
  auto pairs = difference_pairs(m, pspec.adjacent_only);
  double total = 0.0;
  for (const auto& slots : blocks.slots) {
    std::vector<double> diffs;
    diffs.reserve(pairs.size());
    for (auto [a, b] : pairs)
      diffs.push_back(theta[static_cast<size_t>(slots[static_cast<size_t>(a)])] -
                      theta[static_cast<size_t>(slots[static_cast<size_t>(b)])]);
    std::vector<double> block(slots.size());
    for (size_t j = 0; j < slots.size(); ++j) block[j] = theta[static_cast<size_t>(slots[j])];
    total += smoothed_norm(diffs, pspec.epsilon) + smoothed_norm(block, pspec.epsilon);
  }
  return pspec.lambda * total;
}

double penalty_value_grad(const ParamLayout& layout, const std::vector<double>& theta,
                          const PenaltySpec& pspec, std::vector<double>& grad) {
  if (pspec.lambda == 0.0) return 0.0;
  auto blocks = resolve_blocks(layout, pspec);
  const int m = layout.spec().n_measurements();
  auto pairs = difference_pairs(m, pspec.adjacent_only);
  const double eps2 = pspec.epsilon * pspec.epsilon;
  double total = 0.0;
  for (const auto& slots : blocks.slots) {
    // fusion term
    double ss = 0.0;
    std::vector<double> diffs(pairs.size());
    for (size_t p = 0; p < pairs.size(); ++p) {
      auto [a, b] = pairs[p];
      diffs[p] = theta[static_cast<size_t>(slots[static_cast<size_t>(a)])] -
                 theta[static_cast<size_t>(slots[static_cast<size_t>(b)])];
      ss += diffs[p] * diffs[p];
    }
    double root = std::sqrt(ss + eps2);
    total += (ss == 0.0 ? 0.0 : root - pspec.epsilon);
    for (size_t p = 0; p < pairs.size(); ++p) {
      auto [a, b] = pairs[p];
      double g = pspec.lambda * diffs[p] / root;
      grad[static_cast<size_t>(slots[static_cast<size_t>(a)])] += g;
      grad[static_cast<size_t>(slots[static_cast<size_t>(b)])] -= g;
    }
    // selection term
    double bs = 0.0;
    for (int slot : slots) bs += theta[static_cast<size_t>(slot)] * theta[static_cast<size_t>(slot)];
    double broot = std::sqrt(bs + eps2);
    total += (bs == 0.0 ? 0.0 : broot - pspec.epsilon);
    for (int slot : slots)
      grad[static_cast<size_t>(slot)] += pspec.lambda * theta[static_cast<size_t>(slot)] / broot;
  }
  return pspec.lambda * total;
}

std::vector<FusionDiag> fusion_diagnostics(const ParamLayout& layout,
                                           const std::vector<double>& theta,
                                           const PenaltySpec& pspec) {
  auto blocks = resolve_blocks(layout, pspec);
  const ModelSpec& spec = layout.spec();
  std::vector<FusionDiag> out;
  for (size_t i = 0; i < blocks.slots.size(); ++i) {
    const auto& slots = blocks.slots[i];
    FusionDiag d;
    d.covariate = spec.covariates[static_cast<size_t>(blocks.covariate[i])].name;
    double ss = 0.0;
    for (size_t a = 0; a < slots.size(); ++a) {
      double va = theta[static_cast<size_t>(slots[a])];
      ss += va * va;
      for (size_t b = a + 1; b < slots.size(); ++b)
        d.max_pair_diff = std::max(d.max_pair_diff,
                                   std::fabs(va - theta[static_cast<size_t>(slots[b])]));
    }
    d.block_norm = std::sqrt(ss);
    double rms = d.block_norm / std::sqrt(static_cast<double>(slots.size()));
    // relative 5% for sizeable blocks, absolute floor so a block shrunk
    // to ~0 (fully fused and selected away) still reads as fused
    d.fused = d.max_pair_diff < 0.05 * std::max(rms, 1.0);
    out.push_back(std::move(d));
  }
  return out;
}

namespace {

FitResult penalized_core(const ModelSpec& spec, const Dataset& data, const PenaltySpec& pspec,
                         const std::vector<double>* warm, double* objective_out) {
  if (data.size() < 2) throw std::invalid_argument("fit_penalized: at least 2 clusters required");
  if (pspec.lambda < 0.0) throw std::invalid_argument("fit_penalized: lambda must be >= 0");
  if (!(pspec.epsilon > 0.0)) throw std::invalid_argument("fit_penalized: epsilon must be > 0");
  Evaluator ev(spec, data, spec.options.quadrature_order, spec.options.threads);
  resolve_blocks(ev.layout(), pspec);  // validate covariate names up front

  std::vector<double> x0;
  if (warm) {
    x0 = *warm;
  } else if (!spec.options.start.empty()) {
    x0 = spec.options.start;
  } else {
    x0 = starting_values(spec, data);
  }
  if (static_cast<int>(x0.size()) != ev.layout().size())
    throw std::invalid_argument("fit_penalized: starting vector length mismatch");

  auto objective = [&](const std::vector<double>& th, std::vector<double>& grad) {
    double ll = ev.loglik_grad(th, grad);
    for (double& g : grad) g = -g;
    double pen = penalty_value_grad(ev.layout(), th, pspec, grad);
    return -ll + pen;
  };
  LbfgsOptions lopts;
  lopts.max_iterations = spec.options.max_iterations;
  lopts.grad_tol = spec.options.grad_tol;
  auto lr = lbfgs_minimize(objective, std::move(x0), lopts);

  FitResult result;
  result.theta = lr.x;
  result.params = ev.layout().unpack(lr.x);
  result.names = ev.layout().names();
  result.estimates = ev.layout().structured(lr.x);
  result.std_errors.assign(static_cast<size_t>(ev.layout().size()),
                           std::numeric_limits<double>::quiet_NaN());
  result.loglik = ev.loglik(lr.x);  // unpenalized, at the penalized optimum
  result.n_params = ev.layout().size();
  result.aic = 2.0 * result.n_params - 2.0 * result.loglik;
  result.converged = lr.converged;
  result.iterations = lr.iterations;
  result.grad_norm = lr.grad_norm;
  result.se_available = false;
  if (objective_out) *objective_out = lr.f;
  return result;
}

}  // namespace

FitResult fit_penalized(const ModelSpec& spec, const Dataset& data, const PenaltySpec& pspec) {
  return penalized_core(spec, data, pspec, nullptr, nullptr);
}

std::vector<double> default_lambda_grid() {
  std::vector<double> grid(40);
  for (int i = 0; i < 40; ++i) grid[static_cast<size_t>(i)] = std::expm1(6.0 * i / 39.0);
  grid[0] = 0.0;
  return grid;
}

PathResult path(const ModelSpec& spec, const Dataset& data, const std::vector<double>& lambda_grid,
                const PenaltySpec& pspec) {
  if (lambda_grid.empty()) throw std::invalid_argument("path: empty lambda grid");
  if (lambda_grid[0] != 0.0) throw std::invalid_argument("path: lambda grid must start at 0");
  for (size_t i = 1; i < lambda_grid.size(); ++i)
    if (lambda_grid[i] <= lambda_grid[i - 1])
      throw std::invalid_argument("path: lambda grid must be strictly increasing");

  PathResult out;
  out.lambdas = lambda_grid;
  std::vector<double> warm;
  bool have_warm = false;
  for (double lam : lambda_grid) {
    PathEntry entry;
    entry.lambda = lam;
    PenaltySpec ps = pspec;
    ps.lambda = lam;
    try {
      entry.fit = penalized_core(spec, data, ps, have_warm ? &warm : nullptr, &entry.objective);
      ParamLayout layout(spec);
      entry.diag = fusion_diagnostics(layout, entry.fit.theta, ps);
      entry.ok = true;
      warm = entry.fit.theta;
      have_warm = true;
    } catch (const std::exception& e) {
      entry.error = e.what();
    }
    out.entries.push_back(std::move(entry));
  }
  return out;
}

PathResult cross_validate(const ModelSpec& spec, const Dataset& data,
                          const std::vector<double>& lambda_grid, int folds, std::uint64_t seed,
                          const PenaltySpec& pspec) {
  const int n = static_cast<int>(data.size());
  if (folds < 2) throw std::invalid_argument("cross_validate: folds must be >= 2");
  if (folds > n) throw std::invalid_argument("cross_validate: more folds than clusters");

  // Seeded shuffle, then round-robin assignment: every fold is nonempty.
  std::vector<int> order(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> fold_of(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) fold_of[static_cast<size_t>(order[static_cast<size_t>(i)])] = i % folds;

  const size_t L = lambda_grid.size();
  // Held-out negative loglik per (lambda, cluster), cluster-ordered for a
  // deterministic reduction.
  std::vector<std::vector<double>> heldout(L, std::vector<double>(static_cast<size_t>(n), 0.0));

  for (int f = 0; f < folds; ++f) {
    Dataset train, test;
    std::vector<int> test_idx;
    for (int i = 0; i < n; ++i) {
      if (fold_of[static_cast<size_t>(i)] == f) {
        test.push_back(data[static_cast<size_t>(i)]);
        test_idx.push_back(i);
      } else {
        train.push_back(data[static_cast<size_t>(i)]);
      }
    }
    PathResult fold_path = path(spec, train, lambda_grid, pspec);
    Evaluator test_ev(spec, test, spec.options.quadrature_order, spec.options.threads);
    auto rule = test_ev.rule();
    for (size_t l = 0; l < L; ++l) {
      const auto& entry = fold_path.entries[l];
      if (!entry.ok)
        throw std::runtime_error("cross_validate: fit failed at lambda " +
                                 std::to_string(lambda_grid[l]) + ": " + entry.error);
      for (size_t t = 0; t < test.size(); ++t)
        heldout[l][static_cast<size_t>(test_idx[t])] =
            -cluster_marginal_loglik(spec, entry.fit.params, test[t], rule);
    }
  }

  PathResult out = path(spec, data, lambda_grid, pspec);  // full-data path for reporting
  out.cv_loss.resize(L);
  out.cv_se.resize(L);
  for (size_t l = 0; l < L; ++l) {
    double mean = 0.0;
    for (double v : heldout[l]) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : heldout[l]) ss += (v - mean) * (v - mean);
    out.cv_loss[l] = mean;
    out.cv_se[l] = n > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  }
  out.best_index = static_cast<int>(
      std::min_element(out.cv_loss.begin(), out.cv_loss.end()) - out.cv_loss.begin());
  return out;
}

}  // namespace mtm
