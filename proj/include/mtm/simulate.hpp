#ifndef MTM_SIMULATE_HPP
#define MTM_SIMULATE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "mtm/model.hpp"

namespace mtm {

/// How the covariate columns of a simulated dataset are generated.
struct CovariateGen {
  enum class Kind { StandardNormal, Bernoulli, FromFile };
  Kind kind = Kind::StandardNormal;
  double p = 0.5;                         // Bernoulli success probability
  std::vector<std::vector<double>> file;  // FromFile: per-cluster values, one row per cluster

  static CovariateGen standard_normal() { return {}; }
  static CovariateGen bernoulli(double p) { return {Kind::Bernoulli, p, {}}; }
  static CovariateGen from_file(std::vector<std::vector<double>> values) {
    return {Kind::FromFile, 0.5, std::move(values)};
  }
};

struct SimDesign {
  ModelSpec spec;
  Parameters true_params;
  int n_clusters = 0;
  // One generator per spec covariate; covariates are cluster-constant.
  std::vector<CovariateGen> covariate_gens;
  std::uint64_t seed = 0;
};

struct SimResult {
  Dataset data;
  std::vector<std::vector<double>> random_effects;  // drawn b_i, diagnostics only
};

/// Inverse-transform draw from one measurement's response distribution
/// at linear predictor eta (fixed effects + random effect already
/// combined). Continuous: y = delta^{-1}(eta - quantile(F, 1-u));
/// discrete: smallest r in support with 1 - F(eta - delta(r)) < u is
/// exceeded, i.e. P(Y <= r) >= u, found by forward search (capped at
/// 1e7 steps).
double sample_response(const ModelSpec& spec, const Parameters& params, int measurement,
                       double eta, double u);

/// Draws a full clustered dataset. Deterministic given the seed;
/// per-cluster RNG substreams derived via seed_seq so parallel or
/// reordered generation yields identical data.
SimResult sample_dataset(const SimDesign& design);

}  // namespace mtm

#endif
