#ifndef MTM_QUADRATURE_HPP
#define MTM_QUADRATURE_HPP

#include <vector>

namespace mtm {

/// Gauss-Hermite rule for integrals of the form
/// int h(x) exp(-x^2) dx ~= sum_i w_i h(x_i).
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  int order = 0;
};

/// Nodes and weights via Newton iteration on the Hermite recurrence.
QuadratureRule gauss_hermite(int order);

}  // namespace mtm

#endif
