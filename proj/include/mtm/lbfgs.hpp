#ifndef MTM_LBFGS_HPP
#define MTM_LBFGS_HPP

#include <functional>
#include <vector>

namespace mtm {

/// Objective callback: returns f(x) and fills grad (same length as x).
using ObjectiveFn = std::function<double(const std::vector<double>&, std::vector<double>&)>;

struct LbfgsOptions {
  int max_iterations = 500;
  double grad_tol = 1e-5;  // infinity norm of the gradient
  int memory = 10;
  int max_line_search = 40;
};

struct LbfgsResult {
  std::vector<double> x;
  std::vector<double> grad;
  double f = 0.0;
  double grad_norm = 0.0;  // infinity norm at x
  int iterations = 0;
  bool converged = false;
};

/// Limited-memory BFGS minimizer with Armijo backtracking.
LbfgsResult lbfgs_minimize(const ObjectiveFn& fn, std::vector<double> x0,
                           const LbfgsOptions& opts = {});

}  // namespace mtm

#endif
