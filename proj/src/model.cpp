#include "mtm/model.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

namespace mtm {

int ModelSpec::measurement_index(const std::string& id) const {
  for (int j = 0; j < n_measurements(); ++j)
    if (measurements[j].id == id) return j;
  return -1;
}

void ModelSpec::validate() const {
  if (measurements.empty()) throw std::invalid_argument("model spec: at least one measurement required");
  std::set<std::string> ids;
  for (const auto& meas : measurements) {
    if (meas.id.empty()) throw std::invalid_argument("model spec: empty measurement id");
    if (!ids.insert(meas.id).second)
      throw std::invalid_argument("model spec: duplicate measurement id \"" + meas.id + "\"");
    if (meas.type == ResponseType::Continuous) {
      continuous_support(meas.thresholds);  // throws for free basis
    } else {
      discrete_support(meas.thresholds);  // throws for linear basis
    }
  }
  std::set<std::string> cnames;
  for (const auto& cov : covariates) {
    if (cov.name.empty()) throw std::invalid_argument("model spec: empty covariate name");
    if (!cnames.insert(cov.name).second)
      throw std::invalid_argument("model spec: duplicate covariate \"" + cov.name + "\"");
  }
  int q = random_effects.dim;
  if (q < 1 || q > 3)
    throw std::invalid_argument("model spec: random-effects dimension must be in 1..3");
  if (!random_effects.columns.empty() &&
      static_cast<int>(random_effects.columns.size()) != q - 1)
    throw std::invalid_argument(
        "model spec: random-effects columns must number dim - 1 (intercept implied)");
  if (random_effects.columns.empty() && q > 1)
    throw std::invalid_argument(
        "model spec: random-effects of dimension > 1 need named design columns");
  if (options.quadrature_order < 1)
    throw std::invalid_argument("model spec: quadrature order must be >= 1");
}

ParamLayout::ParamLayout(const ModelSpec& spec) : spec_(&spec) {
  spec.validate();
  const int m = spec.n_measurements();
  int pos = 0;
  for (const auto& cov : spec.covariates) {
    beta_base_.push_back(pos);
    pos += cov.scope == Scope::Global ? 1 : m;
  }
  bool any_parametric = false;
  for (int j = 0; j < m; ++j) {
    thresh_base_.push_back(pos);
    const auto& ts = spec.measurements[j].thresholds;
    if (ts.is_free()) {
      pos += ts.k - 1;
    } else {
      any_parametric = true;
      pos += spec.homogeneous_dispersion ? 1 : 2;
    }
  }
  if (spec.homogeneous_dispersion && any_parametric) shared_slope_ = pos++;
  chol_base_ = pos;
  pos += spec.random_effects.dim * (spec.random_effects.dim + 1) / 2;
  size_ = pos;
}

int ParamLayout::beta_index(int cov, int j) const {
  const auto& c = spec_->covariates[static_cast<size_t>(cov)];
  return beta_base_[static_cast<size_t>(cov)] + (c.scope == Scope::Global ? 0 : j);
}

int ParamLayout::thresh_intercept_index(int j) const {
  return spec_->measurements[static_cast<size_t>(j)].thresholds.is_free()
             ? -1
             : thresh_base_[static_cast<size_t>(j)];
}

int ParamLayout::thresh_slope_index(int j) const {
  if (spec_->measurements[static_cast<size_t>(j)].thresholds.is_free()) return -1;
  if (spec_->homogeneous_dispersion) return shared_slope_;
  return thresh_base_[static_cast<size_t>(j)] + 1;
}

int ParamLayout::free_level_base(int j) const { return thresh_base_[static_cast<size_t>(j)]; }

int ParamLayout::chol_index(int r, int c) const {
  // row-major lower triangle
  return chol_base_ + r * (r + 1) / 2 + c;
}

std::vector<double> ParamLayout::pack(const Parameters& p) const {
  const int m = spec_->n_measurements();
  const int q = spec_->random_effects.dim;
  std::vector<double> theta(static_cast<size_t>(size_), 0.0);
  for (int s = 0; s < spec_->n_covariates(); ++s) {
    const auto& block = p.beta[static_cast<size_t>(s)];
    int n = spec_->covariates[static_cast<size_t>(s)].scope == Scope::Global ? 1 : m;
    if (static_cast<int>(block.size()) != n)
      throw std::invalid_argument("pack: beta block size mismatch");
    for (int j = 0; j < n; ++j) theta[static_cast<size_t>(beta_base_[s] + j)] = block[static_cast<size_t>(j)];
  }
  for (int j = 0; j < m; ++j) {
    const auto& ts = spec_->measurements[static_cast<size_t>(j)].thresholds;
    const auto& c = p.thresh[static_cast<size_t>(j)];
    if (ts.is_free()) {
      if (static_cast<int>(c.levels.size()) != ts.k - 1)
        throw std::invalid_argument("pack: free threshold level count mismatch");
      int base = free_level_base(j);
      theta[static_cast<size_t>(base)] = c.levels[0];
      for (int r = 1; r < ts.k - 1; ++r) {
        double gap = c.levels[static_cast<size_t>(r)] - c.levels[static_cast<size_t>(r - 1)];
        if (!(gap > 0.0)) throw std::invalid_argument("pack: free thresholds must be strictly increasing");
        theta[static_cast<size_t>(base + r)] = std::log(gap);
      }
    } else {
      if (!(c.slope > 0.0)) throw std::invalid_argument("pack: threshold slope must be positive");
      theta[static_cast<size_t>(thresh_intercept_index(j))] = c.intercept;
      theta[static_cast<size_t>(thresh_slope_index(j))] = std::log(c.slope);
    }
  }
  for (int r = 0; r < q; ++r)
    for (int c = 0; c <= r; ++c) {
      double v = p.chol_at(q, r, c);
      if (r == c) {
        if (!(v > 0.0)) throw std::invalid_argument("pack: Cholesky diagonal must be positive");
        theta[static_cast<size_t>(chol_index(r, c))] = std::log(v);
      } else {
        theta[static_cast<size_t>(chol_index(r, c))] = v;
      }
    }
  return theta;
}

Parameters ParamLayout::unpack(const std::vector<double>& theta) const {
  if (static_cast<int>(theta.size()) != size_)
    throw std::invalid_argument("unpack: parameter vector length mismatch");
  const int m = spec_->n_measurements();
  const int q = spec_->random_effects.dim;
  Parameters p;
  p.beta.resize(static_cast<size_t>(spec_->n_covariates()));
  for (int s = 0; s < spec_->n_covariates(); ++s) {
    int n = spec_->covariates[static_cast<size_t>(s)].scope == Scope::Global ? 1 : m;
    auto& block = p.beta[static_cast<size_t>(s)];
    block.resize(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j) block[static_cast<size_t>(j)] = theta[static_cast<size_t>(beta_base_[s] + j)];
  }
  p.thresh.resize(static_cast<size_t>(m));
  for (int j = 0; j < m; ++j) {
    const auto& ts = spec_->measurements[static_cast<size_t>(j)].thresholds;
    auto& c = p.thresh[static_cast<size_t>(j)];
    if (ts.is_free()) {
      int base = free_level_base(j);
      c.levels.resize(static_cast<size_t>(ts.k - 1));
      c.levels[0] = theta[static_cast<size_t>(base)];
      for (int r = 1; r < ts.k - 1; ++r)
        c.levels[static_cast<size_t>(r)] =
            c.levels[static_cast<size_t>(r - 1)] + std::exp(theta[static_cast<size_t>(base + r)]);
    } else {
      c.intercept = theta[static_cast<size_t>(thresh_intercept_index(j))];
      c.slope = std::exp(theta[static_cast<size_t>(thresh_slope_index(j))]);
    }
  }
  p.chol.assign(static_cast<size_t>(q) * q, 0.0);
  for (int r = 0; r < q; ++r)
    for (int c = 0; c <= r; ++c) {
      double raw = theta[static_cast<size_t>(chol_index(r, c))];
      p.chol[static_cast<size_t>(r) * q + c] = r == c ? std::exp(raw) : raw;
    }
  return p;
}

std::vector<std::string> ParamLayout::names() const {
  const int m = spec_->n_measurements();
  const int q = spec_->random_effects.dim;
  std::vector<std::string> out(static_cast<size_t>(size_));
  for (int s = 0; s < spec_->n_covariates(); ++s) {
    const auto& cov = spec_->covariates[static_cast<size_t>(s)];
    if (cov.scope == Scope::Global) {
      out[static_cast<size_t>(beta_base_[s])] = "beta." + cov.name;
    } else {
      for (int j = 0; j < m; ++j)
        out[static_cast<size_t>(beta_base_[s] + j)] =
            "beta." + cov.name + "." + spec_->measurements[static_cast<size_t>(j)].id;
    }
  }
  for (int j = 0; j < m; ++j) {
    const auto& meas = spec_->measurements[static_cast<size_t>(j)];
    if (meas.thresholds.is_free()) {
      int base = free_level_base(j);
      for (int r = 0; r < meas.thresholds.k - 1; ++r)
        out[static_cast<size_t>(base + r)] = "thresh." + meas.id + ".level" + std::to_string(r + 1);
    } else {
      out[static_cast<size_t>(thresh_intercept_index(j))] = "thresh." + meas.id + ".intercept";
      if (!spec_->homogeneous_dispersion)
        out[static_cast<size_t>(thresh_slope_index(j))] = "thresh." + meas.id + ".slope";
    }
  }
  if (shared_slope_ >= 0) out[static_cast<size_t>(shared_slope_)] = "thresh.slope";
  for (int r = 0; r < q; ++r)
    for (int c = 0; c <= r; ++c)
      out[static_cast<size_t>(chol_index(r, c))] =
          q == 1 ? "re.sd" : "re.L" + std::to_string(r + 1) + std::to_string(c + 1);
  return out;
}

std::vector<double> ParamLayout::structured(const std::vector<double>& theta) const {
  Parameters p = unpack(theta);
  const int m = spec_->n_measurements();
  const int q = spec_->random_effects.dim;
  std::vector<double> out(theta);
  for (int j = 0; j < m; ++j) {
    const auto& ts = spec_->measurements[static_cast<size_t>(j)].thresholds;
    if (ts.is_free()) {
      int base = free_level_base(j);
      for (int r = 0; r < ts.k - 1; ++r)
        out[static_cast<size_t>(base + r)] = p.thresh[static_cast<size_t>(j)].levels[static_cast<size_t>(r)];
    } else {
      out[static_cast<size_t>(thresh_slope_index(j))] = p.thresh[static_cast<size_t>(j)].slope;
    }
  }
  for (int r = 0; r < q; ++r)
    out[static_cast<size_t>(chol_index(r, r))] = p.chol_at(q, r, r);
  return out;
}

}  // namespace mtm
