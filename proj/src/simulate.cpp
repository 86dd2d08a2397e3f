#include "mtm/simulate.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "mtm/likelihood.hpp"

namespace mtm {

namespace {

constexpr long kSearchCap = 10000000;  // forward-search limit for counts

double threshold_value(const ThresholdsSpec& ts, const ThresholdsCoeffs& tc, long r) {
  return threshold_at(ts, tc, r);
}

}  // namespace

double sample_response(const ModelSpec& spec, const Parameters& params, int measurement,
                       double eta, double u) {
  if (!(u > 0.0 && u < 1.0)) throw std::domain_error("sample_response: u must be in (0,1)");
  if (measurement < 0 || measurement >= spec.n_measurements())
    throw std::invalid_argument("sample_response: measurement index out of range");
  const auto& meas = spec.measurements[static_cast<size_t>(measurement)];
  const auto& ts = meas.thresholds;
  const auto& tc = params.thresh[static_cast<size_t>(measurement)];

  if (meas.type == ResponseType::Continuous) {
    if (ts.is_free())
      throw std::invalid_argument("sample_response: free thresholds have no continuous support");
    // 1 - F(eta - delta(Y)) is uniform; solve 1 - F(eta - delta(y)) = u.
    double t = eta - quantile(meas.family, 1.0 - u);
    return inverse(ts, tc, t);
  }

  // Discrete: smallest r in support with P(Y <= r) = 1 - F(eta - delta(r)) >= u.
  auto sup = discrete_support(ts);
  for (long r = sup.rmin;; ++r) {
    if (sup.bounded && r >= sup.rmax) return static_cast<double>(sup.rmax);
    double t = threshold_value(ts, tc, r);
    double tail = t == std::numeric_limits<double>::infinity() ? 0.0 : cdf(meas.family, eta - t);
    if (1.0 - tail >= u) return static_cast<double>(r);
    if (r - sup.rmin >= kSearchCap)
      throw std::runtime_error("sample_response: forward search exceeded 1e7 categories");
  }
}

SimResult sample_dataset(const SimDesign& design) {
  const ModelSpec& spec = design.spec;
  spec.validate();
  if (design.n_clusters < 1)
    throw std::invalid_argument("sample_dataset: n_clusters must be >= 1");
  const int ncov = spec.n_covariates();
  if (static_cast<int>(design.covariate_gens.size()) != ncov)
    throw std::invalid_argument("sample_dataset: one covariate generator per spec covariate");
  const int q = spec.random_effects.dim;
  const int m = spec.n_measurements();
  if (static_cast<int>(design.true_params.thresh.size()) != m ||
      static_cast<int>(design.true_params.chol.size()) != q * q)
    throw std::invalid_argument("sample_dataset: true_params do not match the spec");

  // Map random-effect design columns onto spec covariates (intercept first).
  std::vector<int> z_cov;
  for (const auto& col : spec.random_effects.columns) {
    int idx = -1;
    for (int s = 0; s < ncov; ++s)
      if (spec.covariates[static_cast<size_t>(s)].name == col) idx = s;
    if (idx < 0)
      throw std::invalid_argument("sample_dataset: random-effect column \"" + col +
                                  "\" is not a spec covariate");
    z_cov.push_back(idx);
  }
  if (static_cast<int>(z_cov.size()) + 1 != q && !(q == 1 && z_cov.empty()))
    throw std::invalid_argument("sample_dataset: random-effect columns must number q - 1");

  SimResult out;
  out.data.resize(static_cast<size_t>(design.n_clusters));
  out.random_effects.resize(static_cast<size_t>(design.n_clusters));

  for (int i = 0; i < design.n_clusters; ++i) {
    // Independent substream per cluster: reordering or parallelizing the
    // loop cannot change the draws.
    std::seed_seq sseq{static_cast<std::uint32_t>(design.seed),
                      static_cast<std::uint32_t>(design.seed >> 32),
                      static_cast<std::uint32_t>(i)};
    std::mt19937_64 rng(sseq);
    std::normal_distribution<double> stdnorm(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    // b = L e, e ~ N(0, I)
    std::vector<double> e(static_cast<size_t>(q));
    for (int r = 0; r < q; ++r) e[static_cast<size_t>(r)] = stdnorm(rng);
    std::vector<double> b(static_cast<size_t>(q), 0.0);
    for (int r = 0; r < q; ++r)
      for (int c = 0; c <= r; ++c)
        b[static_cast<size_t>(r)] += design.true_params.chol_at(q, r, c) * e[static_cast<size_t>(c)];

    // Cluster-constant covariates.
    std::vector<double> x(static_cast<size_t>(ncov), 0.0);
    for (int s = 0; s < ncov; ++s) {
      const auto& gen = design.covariate_gens[static_cast<size_t>(s)];
      switch (gen.kind) {
        case CovariateGen::Kind::StandardNormal: x[static_cast<size_t>(s)] = stdnorm(rng); break;
        case CovariateGen::Kind::Bernoulli:
          x[static_cast<size_t>(s)] = unif(rng) < gen.p ? 1.0 : 0.0;
          break;
        case CovariateGen::Kind::FromFile:
          if (i >= static_cast<int>(gen.file.size()) || gen.file[static_cast<size_t>(i)].empty())
            throw std::invalid_argument("sample_dataset: FromFile covariate lacks a value for "
                                        "cluster " + std::to_string(i));
          x[static_cast<size_t>(s)] = gen.file[static_cast<size_t>(i)][0];
          break;
      }
    }

    std::vector<double> z(static_cast<size_t>(q), 1.0);
    for (size_t r = 0; r < z_cov.size(); ++r)
      z[r + 1] = x[static_cast<size_t>(z_cov[r])];

    Cluster cl;
    cl.id = "c" + std::to_string(i + 1);
    for (int j = 0; j < m; ++j) {
      double eta = 0.0;
      for (int s = 0; s < ncov; ++s) {
        const auto& block = design.true_params.beta[static_cast<size_t>(s)];
        double coef = spec.covariates[static_cast<size_t>(s)].scope == Scope::Global
                          ? block[0]
                          : block[static_cast<size_t>(j)];
        eta += coef * x[static_cast<size_t>(s)];
      }
      for (int r = 0; r < q; ++r) eta += z[static_cast<size_t>(r)] * b[static_cast<size_t>(r)];

      double u = unif(rng);
      while (u <= 0.0 || u >= 1.0) u = unif(rng);
      Observation obs;
      obs.measurement = j;
      obs.y = sample_response(spec, design.true_params, j, eta, u);
      obs.x = x;
      obs.z = z;
      cl.obs.push_back(std::move(obs));
    }
    out.data[static_cast<size_t>(i)] = std::move(cl);
    out.random_effects[static_cast<size_t>(i)] = std::move(b);
  }
  return out;
}

}  // namespace mtm
