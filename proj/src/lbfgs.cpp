#include "mtm/lbfgs.hpp"

#include <cmath>
#include <deque>
#include <stdexcept>

namespace mtm {

namespace {

double inf_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::fabs(x));
  return m;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

LbfgsResult lbfgs_minimize(const ObjectiveFn& fn, std::vector<double> x0, const LbfgsOptions& opts) {
  const size_t n = x0.size();
  LbfgsResult res;
  res.x = std::move(x0);
  res.grad.assign(n, 0.0);
  res.f = fn(res.x, res.grad);
  if (!std::isfinite(res.f)) throw std::runtime_error("lbfgs: objective not finite at the start");
  res.grad_norm = inf_norm(res.grad);

  struct Pair {
    std::vector<double> s, y;
    double rho;
  };
  std::deque<Pair> mem;
  std::vector<double> dir(n), xnew(n), gnew(n), alpha_buf;

  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    res.iterations = iter;
    if (res.grad_norm <= opts.grad_tol) {
      res.converged = true;
      return res;
    }

    // Two-loop recursion for dir = -H g.
    dir = res.grad;
    alpha_buf.assign(mem.size(), 0.0);
    for (size_t i = mem.size(); i-- > 0;) {
      const auto& p = mem[i];
      double a = p.rho * dot(p.s, dir);
      alpha_buf[i] = a;
      for (size_t k = 0; k < n; ++k) dir[k] -= a * p.y[k];
    }
    if (!mem.empty()) {
      const auto& last = mem.back();
      double gamma = dot(last.s, last.y) / dot(last.y, last.y);
      for (size_t k = 0; k < n; ++k) dir[k] *= gamma;
    }
    for (size_t i = 0; i < mem.size(); ++i) {
      const auto& p = mem[i];
      double beta = p.rho * dot(p.y, dir);
      for (size_t k = 0; k < n; ++k) dir[k] += (alpha_buf[i] - beta) * p.s[k];
    }
    for (size_t k = 0; k < n; ++k) dir[k] = -dir[k];

    double g_dot_d = dot(res.grad, dir);
    if (g_dot_d >= 0.0) {  // not a descent direction: fall back to steepest descent
      for (size_t k = 0; k < n; ++k) dir[k] = -res.grad[k];
      g_dot_d = -dot(res.grad, res.grad);
      mem.clear();
    }

    // Armijo backtracking.
    double step = 1.0;
    double fnew = res.f;
    bool ok = false;
    for (int ls = 0; ls < opts.max_line_search; ++ls) {
      for (size_t k = 0; k < n; ++k) xnew[k] = res.x[k] + step * dir[k];
      fnew = fn(xnew, gnew);
      if (std::isfinite(fnew) && fnew <= res.f + 1e-4 * step * g_dot_d) {
        ok = true;
        break;
      }
      step *= 0.5;
    }
    if (!ok) {
      // no progress possible along this direction
      res.converged = res.grad_norm <= opts.grad_tol;
      return res;
    }

    Pair p;
    p.s.resize(n);
    p.y.resize(n);
    for (size_t k = 0; k < n; ++k) {
      p.s[k] = xnew[k] - res.x[k];
      p.y[k] = gnew[k] - res.grad[k];
    }
    double ys = dot(p.y, p.s);
    if (ys > 1e-10 * std::sqrt(dot(p.y, p.y)) * std::sqrt(dot(p.s, p.s))) {
      p.rho = 1.0 / ys;
      mem.push_back(std::move(p));
      if (static_cast<int>(mem.size()) > opts.memory) mem.pop_front();
    }

    res.x.swap(xnew);
    res.grad.swap(gnew);
    res.f = fnew;
    res.grad_norm = inf_norm(res.grad);
  }
  res.iterations = opts.max_iterations;
  res.converged = res.grad_norm <= opts.grad_tol;
  return res;
}

}  // namespace mtm
