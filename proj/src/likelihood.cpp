#include "mtm/likelihood.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <thread>

namespace mtm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLogFloor = -745.0;
constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kLogPi = 1.1447298858494002;

double linear_predictor(const ModelSpec& spec, const Parameters& p, const Observation& obs,
                        const std::vector<double>& b) {
  double eta = 0.0;
  for (int s = 0; s < spec.n_covariates(); ++s) {
    const auto& block = p.beta[static_cast<size_t>(s)];
    double coef = spec.covariates[static_cast<size_t>(s)].scope == Scope::Global
                      ? block[0]
                      : block[static_cast<size_t>(obs.measurement)];
    eta += coef * obs.x[static_cast<size_t>(s)];
  }
  for (size_t r = 0; r < b.size(); ++r) eta += obs.z[r] * b[r];
  return eta;
}

// Whether g is defined at integer level t (thresholds outside are +-inf).
bool level_covered(const ThresholdsSpec& ts, long t) {
  switch (ts.basis) {
    case Basis::Log: return t > 0;
    case Basis::ShiftedLog: return t > -1;
    case Basis::Logit: return t > ts.a && t < ts.b;
    case Basis::Free: return t >= 1 && t <= ts.k - 1;
    case Basis::Linear: return true;
  }
  return true;
}

struct IntervalProb {
  double logp;
  double w_hi;  // pdf(eta - t_lo) / p, zero when t_lo = -inf
  double w_lo;  // pdf(eta - t_hi) / p, zero when t_hi = +inf
};

// P(t_lo < latent threshold interval) = F(eta - t_lo) - F(eta - t_hi).
IntervalProb interval_prob(Family fam, double eta, double t_lo, double t_hi, bool want_grad) {
  IntervalProb out{kLogFloor, 0.0, 0.0};
  double prob;
  if (t_lo == -kInf && t_hi == kInf) {
    out.logp = 0.0;
    return out;
  }
  if (t_lo == -kInf) {
    prob = sf(fam, eta - t_hi);
  } else if (t_hi == kInf) {
    prob = cdf(fam, eta - t_lo);
  } else {
    prob = cdf_diff(fam, eta - t_hi, eta - t_lo);
  }
  if (prob < 1e-300) prob = 1e-300;
  out.logp = std::max(std::log(prob), kLogFloor);
  if (want_grad) {
    if (t_lo != -kInf) out.w_hi = pdf(fam, eta - t_lo) / prob;
    if (t_hi != kInf) out.w_lo = pdf(fam, eta - t_hi) / prob;
  }
  return out;
}

}  // namespace

double continuous_density(const ModelSpec& spec, const Parameters& p, const Observation& obs,
                          const std::vector<double>& b) {
  const auto& meas = spec.measurements[static_cast<size_t>(obs.measurement)];
  if (meas.type != ResponseType::Continuous)
    throw std::invalid_argument("continuous_density: measurement is discrete");
  const auto& ts = meas.thresholds;
  const auto& c = p.thresh[static_cast<size_t>(obs.measurement)];
  double eta = linear_predictor(spec, p, obs, b);
  double u = eta - eval(ts, c, obs.y);
  return pdf(meas.family, u) * deriv(ts, c, obs.y);
}

double discrete_density(const ModelSpec& spec, const Parameters& p, const Observation& obs,
                        const std::vector<double>& b) {
  const auto& meas = spec.measurements[static_cast<size_t>(obs.measurement)];
  if (meas.type != ResponseType::Discrete)
    throw std::invalid_argument("discrete_density: measurement is continuous");
  const auto& ts = meas.thresholds;
  const auto& c = p.thresh[static_cast<size_t>(obs.measurement)];
  long r = std::lround(obs.y);
  auto sup = discrete_support(ts);
  if (std::fabs(obs.y - r) > 1e-9 || r < sup.rmin || (sup.bounded && r > sup.rmax))
    throw std::domain_error("discrete_density: y outside the declared support");
  double eta = linear_predictor(spec, p, obs, b);
  double t_lo = threshold_at(ts, c, r - 1);
  double t_hi = (sup.bounded && r == sup.rmax) ? kInf : threshold_at(ts, c, r);
  return std::exp(interval_prob(meas.family, eta, t_lo, t_hi, false).logp);
}

double cluster_marginal_loglik(const ModelSpec& spec, const Parameters& p, const Cluster& cluster,
                               const QuadratureRule& rule) {
  const int q = spec.random_effects.dim;
  long nodes_total = 1;
  for (int d = 0; d < q; ++d) nodes_total *= rule.order;
  std::vector<int> idx(static_cast<size_t>(q), 0);
  std::vector<double> b(static_cast<size_t>(q), 0.0);
  double best = -kInf;
  std::vector<double> s(static_cast<size_t>(nodes_total));
  for (long k = 0; k < nodes_total; ++k) {
    double lw = -0.5 * q * kLogPi;
    for (int r = 0; r < q; ++r) {
      lw += std::log(rule.weights[static_cast<size_t>(idx[static_cast<size_t>(r)])]);
      double br = 0.0;
      for (int c = 0; c <= r; ++c)
        br += p.chol_at(q, r, c) * rule.nodes[static_cast<size_t>(idx[static_cast<size_t>(c)])];
      b[static_cast<size_t>(r)] = kSqrt2 * br;
    }
    double sk = lw;
    for (const auto& obs : cluster.obs) {
      const auto& meas = spec.measurements[static_cast<size_t>(obs.measurement)];
      double d = meas.type == ResponseType::Continuous ? continuous_density(spec, p, obs, b)
                                                       : discrete_density(spec, p, obs, b);
      sk += std::max(std::log(std::max(d, 0.0)), kLogFloor);
    }
    s[static_cast<size_t>(k)] = sk;
    best = std::max(best, sk);
    for (int d = 0; d < q; ++d) {
      if (++idx[static_cast<size_t>(d)] < rule.order) break;
      idx[static_cast<size_t>(d)] = 0;
    }
  }
  double acc = 0.0;
  for (double sk : s) acc += std::exp(sk - best);
  return best + std::log(acc);
}

struct Evaluator::Scratch {
  std::vector<double> s;       // per node log integrand
  std::vector<double> G;       // node x param gradient of s
  std::vector<double> db;      // node x q, d s / d b
  std::vector<double> bnodes;  // node x q (shared, depends on L only)
};

Evaluator::Evaluator(const ModelSpec& spec, const Dataset& data, int quadrature_order, int threads,
                     long node_budget)
    : spec_(&spec), data_(&data), layout_(spec), rule_(gauss_hermite(quadrature_order)),
      threads_(std::max(1, threads)) {
  const int q = spec.random_effects.dim;
  long total = 1;
  for (int d = 0; d < q; ++d) {
    total *= quadrature_order;
    if (total > node_budget)
      throw std::runtime_error("quadrature grid of " + std::to_string(quadrature_order) + "^" +
                               std::to_string(q) + " nodes exceeds the node budget of " +
                               std::to_string(node_budget));
  }
  grid_.resize(static_cast<size_t>(total));
  log_weight_.resize(static_cast<size_t>(total));
  std::vector<int> idx(static_cast<size_t>(q), 0);
  for (long k = 0; k < total; ++k) {
    grid_[static_cast<size_t>(k)].assign(idx.begin(), idx.end());
    double lw = -0.5 * q * kLogPi;
    for (int d = 0; d < q; ++d) lw += std::log(rule_.weights[static_cast<size_t>(idx[static_cast<size_t>(d)])]);
    log_weight_[static_cast<size_t>(k)] = lw;
    for (int d = 0; d < q; ++d) {
      if (++idx[static_cast<size_t>(d)] < quadrature_order) break;
      idx[static_cast<size_t>(d)] = 0;
    }
  }

  // Precompute observation transforms and validate supports.
  prepared_.resize(data.size());
  const int ncov = spec.n_covariates();
  for (size_t i = 0; i < data.size(); ++i) {
    auto& pc = prepared_[i];
    pc.obs.reserve(data[i].obs.size());
    for (const auto& obs : data[i].obs) {
      if (obs.measurement < 0 || obs.measurement >= spec.n_measurements())
        throw std::invalid_argument("observation references an unknown measurement");
      if (static_cast<int>(obs.x.size()) != ncov)
        throw std::invalid_argument("observation covariate vector length mismatch");
      if (static_cast<int>(obs.z.size()) != q)
        throw std::invalid_argument("observation random-effect design length mismatch");
      const auto& meas = spec.measurements[static_cast<size_t>(obs.measurement)];
      const auto& ts = meas.thresholds;
      PreparedObs po;
      po.measurement = obs.measurement;
      po.x = &obs.x;
      po.z = &obs.z;
      if (meas.type == ResponseType::Continuous) {
        po.discrete = false;
        po.g_y = transform(ts, obs.y);
        po.log_gprime = std::log(transform_deriv(ts, obs.y));
        po.g_lo = po.g_hi = 0.0;
        po.r = 0;
      } else {
        po.discrete = true;
        long r = std::lround(obs.y);
        auto sup = discrete_support(ts);
        if (std::fabs(obs.y - r) > 1e-9 || r < sup.rmin || (sup.bounded && r > sup.rmax))
          throw std::domain_error("cluster " + data[i].id + ": discrete response " +
                                  std::to_string(obs.y) + " outside the support of measurement " +
                                  meas.id);
        po.r = r;
        po.g_y = po.log_gprime = 0.0;
        if (ts.is_free()) {
          po.g_lo = po.g_hi = 0.0;
        } else {
          po.g_lo = level_covered(ts, r - 1) ? transform(ts, static_cast<double>(r - 1)) : -kInf;
          bool top = sup.bounded && r == sup.rmax;
          po.g_hi = (!top && level_covered(ts, r)) ? transform(ts, static_cast<double>(r)) : kInf;
        }
      }
      pc.obs.push_back(po);
    }
  }
}

double Evaluator::eval_cluster(const Parameters& p, const PreparedCluster& cl, Scratch& sc,
                               std::vector<double>* grad) const {
  const auto& spec = *spec_;
  const int q = spec.random_effects.dim;
  const int P = layout_.size();
  const long K = static_cast<long>(grid_.size());
  const bool want_grad = grad != nullptr;

  sc.s.assign(static_cast<size_t>(K), 0.0);
  if (want_grad) {
    sc.G.assign(static_cast<size_t>(K) * P, 0.0);
    sc.db.assign(static_cast<size_t>(K) * q, 0.0);
  }
  for (long k = 0; k < K; ++k) sc.s[static_cast<size_t>(k)] = log_weight_[static_cast<size_t>(k)];

  const int ncov = spec.n_covariates();
  for (const auto& obs : cl.obs) {
    const int j = obs.measurement;
    const auto& meas = spec.measurements[static_cast<size_t>(j)];
    const auto& ts = meas.thresholds;
    const auto& tc = p.thresh[static_cast<size_t>(j)];
    double xb = 0.0;
    for (int s = 0; s < ncov; ++s) {
      const auto& block = p.beta[static_cast<size_t>(s)];
      double coef = spec.covariates[static_cast<size_t>(s)].scope == Scope::Global
                        ? block[0]
                        : block[static_cast<size_t>(j)];
      xb += coef * (*obs.x)[static_cast<size_t>(s)];
    }
    // Per-observation constants.
    double t_y = 0.0, log_jac = 0.0, t_lo = 0.0, t_hi = 0.0;
    if (!obs.discrete) {
      t_y = tc.intercept + tc.slope * obs.g_y;
      log_jac = std::log(tc.slope) + obs.log_gprime;
    } else if (ts.is_free()) {
      t_lo = threshold_at(ts, tc, obs.r - 1);
      t_hi = threshold_at(ts, tc, obs.r);
    } else {
      t_lo = obs.g_lo == -kInf ? -kInf : tc.intercept + tc.slope * obs.g_lo;
      t_hi = obs.g_hi == kInf ? kInf : tc.intercept + tc.slope * obs.g_hi;
    }

    for (long k = 0; k < K; ++k) {
      double eta = xb;
      const double* b = &sc.bnodes[static_cast<size_t>(k) * q];
      for (int r = 0; r < q; ++r) eta += (*obs.z)[static_cast<size_t>(r)] * b[r];

      double logf, c_eta = 0.0;
      double d_int = 0.0, d_lslope = 0.0;  // d logf / d intercept, d logf / d log slope
      double w_hi = 0.0, w_lo = 0.0;
      if (!obs.discrete) {
        double u = eta - t_y;
        logf = std::max(log_pdf(meas.family, u) + log_jac, kLogFloor);
        if (want_grad) {
          double psi = log_pdf_deriv(meas.family, u);
          c_eta = psi;
          d_int = -psi;
          d_lslope = -psi * tc.slope * obs.g_y + 1.0;
        }
      } else {
        auto ip = interval_prob(meas.family, eta, t_lo, t_hi, want_grad);
        logf = ip.logp;
        if (want_grad) {
          w_hi = ip.w_hi;
          w_lo = ip.w_lo;
          c_eta = w_hi - w_lo;
          if (!ts.is_free()) {
            d_int = w_lo - w_hi;
            d_lslope = 0.0;
            if (t_lo != -kInf) d_lslope -= w_hi * tc.slope * obs.g_lo;
            if (t_hi != kInf) d_lslope += w_lo * tc.slope * obs.g_hi;
          }
        }
      }
      sc.s[static_cast<size_t>(k)] += logf;

      if (!want_grad) continue;
      double* G = &sc.G[static_cast<size_t>(k) * P];
      for (int s = 0; s < ncov; ++s) {
        double xs = (*obs.x)[static_cast<size_t>(s)];
        if (xs != 0.0) G[layout_.beta_index(s, j)] += c_eta * xs;
      }
      if (ts.is_free()) {
        int base = layout_.free_level_base(j);
        // d logp / d delta(r-1) = -w_hi, d logp / d delta(r) = +w_lo
        auto add_level = [&](long level, double coef) {
          if (level < 1 || level > ts.k - 1 || coef == 0.0) return;
          G[base] += coef;  // level1 raw parameter
          for (long t = 1; t < level; ++t) {
            double gap = tc.levels[static_cast<size_t>(t)] - tc.levels[static_cast<size_t>(t - 1)];
            G[base + t] += coef * gap;
          }
        };
        add_level(obs.r - 1, -w_hi);
        add_level(obs.r, w_lo);
      } else {
        G[layout_.thresh_intercept_index(j)] += d_int;
        G[layout_.thresh_slope_index(j)] += d_lslope;
      }
      double* db = &sc.db[static_cast<size_t>(k) * q];
      for (int r = 0; r < q; ++r) db[r] += c_eta * (*obs.z)[static_cast<size_t>(r)];
    }
  }

  // log-sum-exp with max shift
  double best = -kInf;
  for (long k = 0; k < K; ++k) best = std::max(best, sc.s[static_cast<size_t>(k)]);
  double acc = 0.0;
  for (long k = 0; k < K; ++k) acc += std::exp(sc.s[static_cast<size_t>(k)] - best);
  double ll = best + std::log(acc);

  if (want_grad) {
    for (long k = 0; k < K; ++k) {
      double pk = std::exp(sc.s[static_cast<size_t>(k)] - ll);
      if (pk == 0.0) continue;
      const double* G = &sc.G[static_cast<size_t>(k) * P];
      for (int i = 0; i < P; ++i) (*grad)[static_cast<size_t>(i)] += pk * G[i];
      // chain d s / d b into the Cholesky parameters: b = sqrt(2) L u
      const double* db = &sc.db[static_cast<size_t>(k) * q];
      const auto& idx = grid_[static_cast<size_t>(k)];
      for (int r = 0; r < q; ++r) {
        if (db[r] == 0.0) continue;
        for (int c = 0; c <= r; ++c) {
          double u_c = rule_.nodes[static_cast<size_t>(idx[static_cast<size_t>(c)])];
          double jac = kSqrt2 * u_c * (r == c ? p.chol_at(q, r, c) : 1.0);
          (*grad)[static_cast<size_t>(layout_.chol_index(r, c))] += pk * db[r] * jac;
        }
      }
    }
  }
  return ll;
}

double Evaluator::reduce(const std::vector<double>& theta, std::vector<double>* grad) const {
  Parameters p = layout_.unpack(theta);
  const int q = spec_->random_effects.dim;
  const long K = static_cast<long>(grid_.size());
  // Node positions b = sqrt(2) L u, shared across clusters.
  std::vector<double> bnodes(static_cast<size_t>(K) * q);
  for (long k = 0; k < K; ++k) {
    const auto& idx = grid_[static_cast<size_t>(k)];
    for (int r = 0; r < q; ++r) {
      double br = 0.0;
      for (int c = 0; c <= r; ++c)
        br += p.chol_at(q, r, c) * rule_.nodes[static_cast<size_t>(idx[static_cast<size_t>(c)])];
      bnodes[static_cast<size_t>(k) * q + r] = kSqrt2 * br;
    }
  }

  const int n = static_cast<int>(prepared_.size());
  const int P = layout_.size();
  std::vector<double> cluster_ll(static_cast<size_t>(n));
  int nthreads = std::min(threads_, n);
  // Per-cluster gradient rows, combined sequentially afterwards so the
  // result is bit-identical for any thread count.
  std::vector<std::vector<double>> cluster_grad;
  if (grad) cluster_grad.assign(static_cast<size_t>(n), std::vector<double>(static_cast<size_t>(P), 0.0));

  auto work = [&](int lo, int hi) {
    Scratch sc;
    sc.bnodes = bnodes;
    for (int i = lo; i < hi; ++i) {
      std::vector<double>* g = grad ? &cluster_grad[static_cast<size_t>(i)] : nullptr;
      cluster_ll[static_cast<size_t>(i)] = eval_cluster(p, prepared_[static_cast<size_t>(i)], sc, g);
    }
  };

  if (nthreads <= 1) {
    work(0, n);
  } else {
    std::vector<std::thread> pool;
    int chunk = (n + nthreads - 1) / nthreads;
    for (int t = 0; t < nthreads; ++t) {
      int lo = t * chunk, hi = std::min(n, lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back(work, lo, hi);
    }
    for (auto& th : pool) th.join();
  }

  // Deterministic compensated (Kahan) summation in cluster order.
  double sum = 0.0, comp = 0.0;
  for (int i = 0; i < n; ++i) {
    double y = cluster_ll[static_cast<size_t>(i)] - comp;
    double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  if (grad) {
    grad->assign(static_cast<size_t>(P), 0.0);
    for (const auto& cg : cluster_grad)
      for (int i = 0; i < P; ++i) (*grad)[static_cast<size_t>(i)] += cg[static_cast<size_t>(i)];
  }
  return sum;
}

double Evaluator::loglik(const std::vector<double>& theta) const { return reduce(theta, nullptr); }

double Evaluator::loglik_grad(const std::vector<double>& theta, std::vector<double>& grad) const {
  return reduce(theta, &grad);
}

double total_loglik(const ModelSpec& spec, const Parameters& p, const Dataset& data,
                    const QuadratureRule& rule) {
  double sum = 0.0, comp = 0.0;
  for (const auto& cl : data) {
    double y = cluster_marginal_loglik(spec, p, cl, rule) - comp;
    double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum;
}

std::vector<double> loglik_gradient(const ModelSpec& spec, const std::vector<double>& theta,
                                    const Dataset& data, int quadrature_order) {
  Evaluator ev(spec, data, quadrature_order);
  std::vector<double> grad;
  ev.loglik_grad(theta, grad);
  return grad;
}

}  // namespace mtm
