#include "mtm/fit.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "mtm/lbfgs.hpp"
#include "mtm/special.hpp"

namespace mtm {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

}  // namespace

std::vector<double> starting_values(const ModelSpec& spec, const Dataset& data) {
  ParamLayout layout(spec);
  const int m = spec.n_measurements();
  Parameters p;
  p.beta.resize(static_cast<size_t>(spec.n_covariates()));
  for (int s = 0; s < spec.n_covariates(); ++s)
    p.beta[static_cast<size_t>(s)].assign(
        spec.covariates[static_cast<size_t>(s)].scope == Scope::Global ? 1u : static_cast<size_t>(m), 0.0);

  // Marginal g(y) moments / category frequencies per measurement.
  std::vector<std::vector<double>> gvals(static_cast<size_t>(m));
  std::vector<std::map<long, int>> counts(static_cast<size_t>(m));
  std::vector<int> nobs(static_cast<size_t>(m), 0);
  for (const auto& cl : data)
    for (const auto& obs : cl.obs) {
      const auto& meas = spec.measurements[static_cast<size_t>(obs.measurement)];
      ++nobs[static_cast<size_t>(obs.measurement)];
      if (meas.thresholds.is_free()) {
        counts[static_cast<size_t>(obs.measurement)][std::lround(obs.y)] += 1;
      } else {
        gvals[static_cast<size_t>(obs.measurement)].push_back(transform(meas.thresholds, obs.y));
      }
    }

  p.thresh.resize(static_cast<size_t>(m));
  for (int j = 0; j < m; ++j) {
    const auto& meas = spec.measurements[static_cast<size_t>(j)];
    const auto& ts = meas.thresholds;
    auto mom = moments(meas.family);
    auto& tc = p.thresh[static_cast<size_t>(j)];
    if (ts.is_free()) {
      // delta(r) = -F^{-1}(P(Y > r)) at zero predictor
      int total = nobs[static_cast<size_t>(j)];
      tc.levels.resize(static_cast<size_t>(ts.k - 1));
      int cum = 0;
      double prev = -std::numeric_limits<double>::infinity();
      for (int r = 1; r <= ts.k - 1; ++r) {
        auto it = counts[static_cast<size_t>(j)].find(r);
        cum += it == counts[static_cast<size_t>(j)].end() ? 0 : it->second;
        double tail = total > 0 ? 1.0 - static_cast<double>(cum) / total : 0.5;
        tail = std::clamp(tail, 1e-3, 1.0 - 1e-3);
        double level = -quantile(meas.family, tail);
        if (level <= prev + 1e-3) level = prev + 1e-3;
        tc.levels[static_cast<size_t>(r - 1)] = level;
        prev = level;
      }
    } else {
      const auto& g = gvals[static_cast<size_t>(j)];
      double mean = 0.0, sd = 1.0;
      if (!g.empty()) {
        for (double v : g) mean += v;
        mean /= static_cast<double>(g.size());
        double ss = 0.0;
        for (double v : g) ss += (v - mean) * (v - mean);
        sd = g.size() > 1 ? std::sqrt(ss / static_cast<double>(g.size())) : 1.0;
      }
      if (!(sd > 1e-6)) sd = 1.0;
      tc.slope = std::sqrt(mom.variance) / sd;
      tc.intercept = -mean * tc.slope - mom.mean;
    }
  }
  if (spec.homogeneous_dispersion) {
    // shared slope: geometric mean of the per-measurement candidates
    double acc = 0.0;
    int cnt = 0;
    for (int j = 0; j < m; ++j)
      if (!spec.measurements[static_cast<size_t>(j)].thresholds.is_free()) {
        acc += std::log(p.thresh[static_cast<size_t>(j)].slope);
        ++cnt;
      }
    double shared = cnt > 0 ? std::exp(acc / cnt) : 1.0;
    for (int j = 0; j < m; ++j)
      if (!spec.measurements[static_cast<size_t>(j)].thresholds.is_free())
        p.thresh[static_cast<size_t>(j)].slope = shared;
  }
  const int q = spec.random_effects.dim;
  p.chol.assign(static_cast<size_t>(q) * q, 0.0);
  for (int r = 0; r < q; ++r) p.chol[static_cast<size_t>(r) * q + r] = 0.5;
  return layout.pack(p);
}

void compute_std_errors(const Evaluator& ev, FitResult& result) {
  const int P = ev.layout().size();
  Eigen::MatrixXd hess(P, P);
  std::vector<double> th = result.theta, gp, gm;
  for (int i = 0; i < P; ++i) {
    double h = 1e-4 * (1.0 + std::fabs(result.theta[static_cast<size_t>(i)]));
    th[static_cast<size_t>(i)] = result.theta[static_cast<size_t>(i)] + h;
    ev.loglik_grad(th, gp);
    th[static_cast<size_t>(i)] = result.theta[static_cast<size_t>(i)] - h;
    ev.loglik_grad(th, gm);
    th[static_cast<size_t>(i)] = result.theta[static_cast<size_t>(i)];
    for (int j = 0; j < P; ++j)
      hess(j, i) = (gp[static_cast<size_t>(j)] - gm[static_cast<size_t>(j)]) / (2.0 * h);
  }
  Eigen::MatrixXd neg = -0.5 * (hess + hess.transpose());
  Eigen::LDLT<Eigen::MatrixXd> ldlt(neg);
  result.std_errors.assign(static_cast<size_t>(P), kNan);
  result.se_available = false;
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return;
  Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(P, P));

  // Delta method onto the structured scale: J = d structured / d theta.
  Eigen::MatrixXd jac(P, P);
  for (int i = 0; i < P; ++i) {
    double h = 1e-6 * (1.0 + std::fabs(result.theta[static_cast<size_t>(i)]));
    th[static_cast<size_t>(i)] = result.theta[static_cast<size_t>(i)] + h;
    auto sp = ev.layout().structured(th);
    th[static_cast<size_t>(i)] = result.theta[static_cast<size_t>(i)] - h;
    auto sm = ev.layout().structured(th);
    th[static_cast<size_t>(i)] = result.theta[static_cast<size_t>(i)];
    for (int j = 0; j < P; ++j)
      jac(j, i) = (sp[static_cast<size_t>(j)] - sm[static_cast<size_t>(j)]) / (2.0 * h);
  }
  Eigen::MatrixXd cs = jac * cov * jac.transpose();
  bool ok = true;
  for (int i = 0; i < P; ++i) {
    double v = cs(i, i);
    if (!(v > 0.0) || !std::isfinite(v)) {
      ok = false;
      break;
    }
    result.std_errors[static_cast<size_t>(i)] = std::sqrt(v);
  }
  if (!ok) {
    result.std_errors.assign(static_cast<size_t>(P), kNan);
    return;
  }
  result.se_available = true;
}

FitResult fit(const ModelSpec& spec, const Dataset& data) {
  if (data.size() < 2) throw std::invalid_argument("fit: at least 2 clusters required");
  Evaluator ev(spec, data, spec.options.quadrature_order, spec.options.threads);

  std::vector<double> x0 =
      spec.options.start.empty() ? starting_values(spec, data) : spec.options.start;
  if (static_cast<int>(x0.size()) != ev.layout().size())
    throw std::invalid_argument("fit: starting vector length mismatch");

  auto objective = [&](const std::vector<double>& th, std::vector<double>& grad) {
    double ll = ev.loglik_grad(th, grad);
    for (double& g : grad) g = -g;
    return -ll;
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
  result.loglik = -lr.f;
  result.n_params = ev.layout().size();
  result.aic = 2.0 * result.n_params - 2.0 * result.loglik;
  result.converged = lr.converged;
  result.iterations = lr.iterations;
  result.grad_norm = lr.grad_norm;
  compute_std_errors(ev, result);
  return result;
}

LrTestResult lr_test(const FitResult& full, const FitResult& reduced) {
  int df = full.n_params - reduced.n_params;
  if (df <= 0) throw std::invalid_argument("lr_test: full model must have more parameters");
  if (full.loglik < reduced.loglik - 1e-6)
    throw std::invalid_argument("lr_test: full log-likelihood below reduced; models not nested");
  LrTestResult t;
  t.statistic = std::max(0.0, 2.0 * (full.loglik - reduced.loglik));
  t.df = df;
  t.p_value = special::chi_square_tail(t.statistic, df);
  return t;
}

std::vector<ScanEntry> global_vs_varying_scan(const ModelSpec& spec, const Dataset& data) {
  if (spec.n_measurements() < 2)
    throw std::invalid_argument("global_vs_varying_scan: needs m >= 2 measurements");
  bool any = false;
  for (const auto& c : spec.covariates) any = any || c.scope == Scope::PerMeasurement;
  if (!any)
    throw std::invalid_argument("global_vs_varying_scan: no per-measurement covariates to test");

  FitResult full = fit(spec, data);
  std::vector<ScanEntry> out;
  for (int s = 0; s < spec.n_covariates(); ++s) {
    if (spec.covariates[static_cast<size_t>(s)].scope != Scope::PerMeasurement) continue;
    ScanEntry entry;
    entry.covariate = spec.covariates[static_cast<size_t>(s)].name;
    try {
      ModelSpec reduced_spec = spec;
      reduced_spec.covariates[static_cast<size_t>(s)].scope = Scope::Global;
      reduced_spec.options.start.clear();
      FitResult reduced = fit(reduced_spec, data);
      entry.test = lr_test(full, reduced);
      entry.loglik_reduced = reduced.loglik;
      entry.ok = true;
    } catch (const std::exception& e) {
      entry.error = e.what();
    }
    out.push_back(std::move(entry));
  }
  return out;
}

}  // namespace mtm
