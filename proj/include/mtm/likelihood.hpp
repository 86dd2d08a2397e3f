#ifndef MTM_LIKELIHOOD_HPP
#define MTM_LIKELIHOOD_HPP

#include <vector>

#include "mtm/model.hpp"
#include "mtm/quadrature.hpp"

namespace mtm {

/// Density of a continuous observation given the random effect b:
/// f(eta - delta(y)) * delta'(y).
double continuous_density(const ModelSpec& spec, const Parameters& p, const Observation& obs,
                          const std::vector<double>& b);

/// Probability of a discrete observation given b:
/// F(eta - delta(r-1)) - F(eta - delta(r)), with the support boundary
/// thresholds at -inf / +inf.
double discrete_density(const ModelSpec& spec, const Parameters& p, const Observation& obs,
                        const std::vector<double>& b);

/// Log of the Gauss-Hermite approximation of the cluster integral
/// int prod_j f_ij(y_ij | b) N(b; 0, LL^T) db over the tensor grid,
/// with the change of variables b = sqrt(2) L u.
double cluster_marginal_loglik(const ModelSpec& spec, const Parameters& p, const Cluster& cluster,
                               const QuadratureRule& rule);

/// Evaluates the marginal log-likelihood and its gradient with respect
/// to the packed unconstrained parameters. Observation transforms are
/// precomputed once per dataset; evaluation is pure in theta.
class Evaluator {
 public:
  Evaluator(const ModelSpec& spec, const Dataset& data, int quadrature_order, int threads = 1,
            long node_budget = kDefaultNodeBudget);

  double loglik(const std::vector<double>& theta) const;

  /// Returns the log-likelihood; fills grad (resized to layout().size())
  /// with the exact gradient of the quadrature-approximated objective.
  double loglik_grad(const std::vector<double>& theta, std::vector<double>& grad) const;

  const ParamLayout& layout() const { return layout_; }
  const ModelSpec& spec() const { return *spec_; }
  const QuadratureRule& rule() const { return rule_; }
  int n_clusters() const { return static_cast<int>(data_->size()); }

  static constexpr long kDefaultNodeBudget = 3375;  // 15^3

 private:
  struct PreparedObs {
    int measurement;
    bool discrete;
    double g_y;        // continuous: g(y)
    double log_gprime; // continuous: log g'(y)
    double g_lo;       // discrete parametric: g(r-1), -inf at the boundary
    double g_hi;       // discrete parametric: g(r), +inf at the boundary
    long r;            // discrete: level
    const std::vector<double>* x;
    const std::vector<double>* z;
  };
  struct PreparedCluster {
    std::vector<PreparedObs> obs;
  };
  struct Scratch;

  double eval_cluster(const Parameters& p, const PreparedCluster& cl, Scratch& sc,
                      std::vector<double>* grad) const;
  double reduce(const std::vector<double>& theta, std::vector<double>* grad) const;

  const ModelSpec* spec_;
  const Dataset* data_;
  ParamLayout layout_;
  QuadratureRule rule_;
  int threads_;
  std::vector<PreparedCluster> prepared_;
  // tensor grid: per node flat index, the per-dimension node index
  std::vector<std::vector<int>> grid_;
  std::vector<double> log_weight_;  // per flat node, sum log w_d - (q/2) log pi
};

/// Convenience wrappers matching the operation-level interface.
double total_loglik(const ModelSpec& spec, const Parameters& p, const Dataset& data,
                    const QuadratureRule& rule);
std::vector<double> loglik_gradient(const ModelSpec& spec, const std::vector<double>& theta,
                                    const Dataset& data, int quadrature_order);

}  // namespace mtm

#endif
