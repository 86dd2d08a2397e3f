#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "mtm/likelihood.hpp"

using namespace mtm;

namespace {

ModelSpec spec_one(ResponseType type, Family fam, ThresholdsSpec ts) {
  ModelSpec spec;
  Measurement m;
  m.id = "m1";
  m.type = type;
  m.family = fam;
  m.thresholds = ts;
  spec.measurements.push_back(m);
  spec.random_effects.dim = 1;
  return spec;
}

Parameters params_one(double intercept, double slope, double sd) {
  Parameters p;
  p.thresh.resize(1);
  p.thresh[0].intercept = intercept;
  p.thresh[0].slope = slope;
  p.chol = {sd};
  return p;
}

Observation obs_of(double y) {
  Observation o;
  o.measurement = 0;
  o.y = y;
  o.z = {1.0};
  return o;
}

// Small mixed-type synthetic dataset used by the gradient and threading
// checks: continuous + count + ordinal measurements, two covariates.
ModelSpec mixed_spec() {
  ModelSpec spec;
  Measurement a;
  a.id = "cont";
  a.type = ResponseType::Continuous;
  a.family = Family::Normal;
  a.thresholds = ThresholdsSpec::log();
  Measurement b;
  b.id = "cnt";
  b.type = ResponseType::Discrete;
  b.family = Family::Gumbel;
  b.thresholds = ThresholdsSpec::shifted_log();
  Measurement c;
  c.id = "ord";
  c.type = ResponseType::Discrete;
  c.family = Family::Logistic;
  c.thresholds = ThresholdsSpec::free(4);
  spec.measurements = {a, b, c};
  spec.covariates = {{"x1", Scope::Global}, {"x2", Scope::PerMeasurement}};
  spec.random_effects.dim = 1;
  return spec;
}

Dataset mixed_data(int n_clusters, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> cnt(0, 7);
  std::uniform_int_distribution<int> ord(1, 4);
  std::uniform_real_distribution<double> pos(0.3, 6.0);
  Dataset data;
  for (int i = 0; i < n_clusters; ++i) {
    Cluster cl;
    cl.id = "c" + std::to_string(i);
    double x1 = gauss(rng), x2 = gauss(rng);
    for (int j = 0; j < 3; ++j) {
      Observation o;
      o.measurement = j;
      o.y = j == 0 ? pos(rng) : j == 1 ? cnt(rng) : ord(rng);
      o.x = {x1, x2};
      o.z = {1.0};
      cl.obs.push_back(o);
    }
    data.push_back(cl);
  }
  return data;
}

std::vector<double> mixed_theta(const ParamLayout& layout, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 0.3);
  std::vector<double> theta(static_cast<size_t>(layout.size()));
  for (double& t : theta) t = gauss(rng);
  return theta;
}

}  // namespace

TEST_CASE("continuous density reference points") {
  auto spec = spec_one(ResponseType::Continuous, Family::Normal, ThresholdsSpec::linear());
  auto p = params_one(0.0, 1.0, 1.0);
  CHECK(continuous_density(spec, p, obs_of(0.0), {0.0}) ==
        doctest::Approx(0.3989422804014327).epsilon(1e-12));
  auto spec_log = spec_one(ResponseType::Continuous, Family::Normal, ThresholdsSpec::log());
  CHECK(continuous_density(spec_log, p, obs_of(1.0), {0.0}) ==
        doctest::Approx(0.3989422804014327).epsilon(1e-12));
}

TEST_CASE("continuous density composes pdf with the threshold transform") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  for (Family fam : {Family::Normal, Family::Logistic, Family::Gumbel, Family::Gompertz}) {
    struct B {
      ThresholdsSpec ts;
      double lo, hi;
    } bases[] = {{ThresholdsSpec::linear(), -5.0, 5.0},
                 {ThresholdsSpec::log(), 0.1, 8.0},
                 {ThresholdsSpec::shifted_log(), -0.9, 8.0},
                 {ThresholdsSpec::logit(0, 10), 0.5, 9.5}};
    for (const auto& bs : bases) {
      auto spec = spec_one(ResponseType::Continuous, fam, bs.ts);
      auto p = params_one(u(rng), std::exp(u(rng)), 1.0);
      double eta = u(rng);
      for (int i = 0; i <= 20; ++i) {
        double y = bs.lo + (bs.hi - bs.lo) * i / 20.0;
        double expect =
            pdf(fam, eta - eval(bs.ts, p.thresh[0], y)) * deriv(bs.ts, p.thresh[0], y);
        CHECK(continuous_density(spec, p, obs_of(y), {eta}) ==
              doctest::Approx(expect).epsilon(1e-12).scale(1.0));
      }
    }
  }
}

TEST_CASE("continuous density integrates to one over the response scale") {
  // a configuration with fast tail decay so the direct y-integral is
  // well-behaved: log thresholds, normal family
  auto spec = spec_one(ResponseType::Continuous, Family::Normal, ThresholdsSpec::log());
  auto p = params_one(0.2, 1.5, 1.0);
  double eta = 0.4;
  double mass = testutil::simpson(
      [&](double y) { return continuous_density(spec, p, obs_of(y), {eta}); }, 1e-5, 60.0, 40000);
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("discrete density reference points and total mass") {
  auto spec = spec_one(ResponseType::Discrete, Family::Normal, ThresholdsSpec::shifted_log());
  auto p = params_one(0.0, 1.0, 1.0);
  CHECK(discrete_density(spec, p, obs_of(0.0), {0.0}) == doctest::Approx(0.5).epsilon(1e-12));
  double total = 0.0;
  for (long r = 0; r <= 1000000; ++r) {
    total += discrete_density(spec, p, obs_of(static_cast<double>(r)), {0.0});
    if (total > 1.0 - 1e-12) break;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("ordinal probabilities equal brute-force cdf differences") {
  auto spec = spec_one(ResponseType::Discrete, Family::Logistic, ThresholdsSpec::logit(0.9, 4));
  auto p = params_one(0.1, 0.8, 1.0);
  double eta = 0.3;
  double total = 0.0;
  for (long r = 1; r <= 4; ++r) {
    double t_lo = r == 1 ? -INFINITY : eval(spec.measurements[0].thresholds, p.thresh[0],
                                            static_cast<double>(r - 1));
    double t_hi = r == 4 ? INFINITY : eval(spec.measurements[0].thresholds, p.thresh[0],
                                           static_cast<double>(r));
    double hi = r == 1 ? 1.0 : cdf(Family::Logistic, eta - t_lo);
    double lo = r == 4 ? 0.0 : cdf(Family::Logistic, eta - t_hi);
    double expect = hi - lo;
    CHECK(discrete_density(spec, p, obs_of(static_cast<double>(r)), {eta}) ==
          doctest::Approx(expect).epsilon(1e-12));
    total += expect;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("free-threshold ordinal equals a cumulative logit model") {
  // P(Y <= r) = logistic(delta(r) - eta) is the cumulative-logit model
  // with thresholds delta(r); cell probabilities must match exactly.
  auto spec = spec_one(ResponseType::Discrete, Family::Logistic, ThresholdsSpec::free(5));
  Parameters p;
  p.thresh.resize(1);
  p.thresh[0].levels = {-1.5, -0.4, 0.6, 1.9};
  p.chol = {1.0};
  for (double eta : {-1.3, 0.0, 0.7, 2.2}) {
    double total = 0.0;
    for (long r = 1; r <= 5; ++r) {
      double cum_hi = r == 5 ? 1.0 : 1.0 / (1.0 + std::exp(-(p.thresh[0].levels[r - 1] - eta)));
      double cum_lo = r == 1 ? 0.0 : 1.0 / (1.0 + std::exp(-(p.thresh[0].levels[r - 2] - eta)));
      double cell = cum_hi - cum_lo;
      CHECK(discrete_density(spec, p, obs_of(static_cast<double>(r)), {eta}) ==
            doctest::Approx(cell).epsilon(1e-10));
      total += cell;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("cluster marginal loglik: degenerate mixing equals the b=0 sum") {
  auto spec = spec_one(ResponseType::Continuous, Family::Gumbel, ThresholdsSpec::log());
  Parameters p = params_one(0.3, 1.2, 0.0);  // L = 0
  Cluster cl;
  cl.id = "c";
  for (double y : {0.5, 1.0, 2.5}) cl.obs.push_back(obs_of(y));
  auto rule = gauss_hermite(15);
  double got = cluster_marginal_loglik(spec, p, cl, rule);
  double expect = 0.0;
  for (const auto& o : cl.obs) expect += std::log(continuous_density(spec, p, o, {0.0}));
  CHECK(got == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("cluster marginal loglik matches a trapezoid oracle") {
  auto spec = spec_one(ResponseType::Continuous, Family::Normal, ThresholdsSpec::linear());
  Parameters p = params_one(-0.5, 0.8, 0.9);
  Cluster cl;
  cl.id = "c";
  for (double y : {-0.3, 1.1}) cl.obs.push_back(obs_of(y));
  double sd = 0.9;
  auto integrand = [&](double b) {
    double v = 1.0;
    for (const auto& o : cl.obs) v *= continuous_density(spec, p, o, {b});
    return v * std::exp(-0.5 * b * b / (sd * sd)) / (sd * std::sqrt(2.0 * M_PI));
  };
  double oracle = 0.0;
  const int n = 20000;
  double lo = -10.0 * sd, hi = 10.0 * sd, h = (hi - lo) / n;
  for (int i = 0; i <= n; ++i) oracle += integrand(lo + i * h) * (i == 0 || i == n ? 0.5 : 1.0);
  oracle = std::log(oracle * h);
  double got = cluster_marginal_loglik(spec, p, cl, gauss_hermite(30));
  CHECK(got == doctest::Approx(oracle).epsilon(1e-6));
}

TEST_CASE("quadrature self-convergence on a mixed cluster") {
  auto spec = mixed_spec();
  auto data = mixed_data(1, 11);
  ParamLayout layout(spec);
  auto theta = mixed_theta(layout, 5);
  Parameters p = layout.unpack(theta);
  double l8 = cluster_marginal_loglik(spec, p, data[0], gauss_hermite(8));
  double l30 = cluster_marginal_loglik(spec, p, data[0], gauss_hermite(30));
  double l60 = cluster_marginal_loglik(spec, p, data[0], gauss_hermite(60));
  double e8 = std::fabs(l8 - l60), e30 = std::fabs(l30 - l60);
  CHECK(e30 < 1e-4);
  CHECK(e30 < 0.01 * e8);  // error shrinks rapidly with order
}

TEST_CASE("two identical clusters double the loglik") {
  auto spec = spec_one(ResponseType::Continuous, Family::Normal, ThresholdsSpec::linear());
  Parameters p = params_one(0.0, 1.0, 0.7);
  Cluster cl;
  cl.id = "a";
  cl.obs.push_back(obs_of(0.4));
  Dataset data = {cl, cl};
  data[1].id = "b";
  auto rule = gauss_hermite(15);
  CHECK(total_loglik(spec, p, data, rule) ==
        doctest::Approx(2.0 * cluster_marginal_loglik(spec, p, data[0], rule)).epsilon(1e-14));
}

TEST_CASE("Evaluator agrees with the free functions") {
  auto spec = mixed_spec();
  auto data = mixed_data(12, 3);
  Evaluator ev(spec, data, 15);
  auto theta = mixed_theta(ev.layout(), 9);
  Parameters p = ev.layout().unpack(theta);
  CHECK(ev.loglik(theta) ==
        doctest::Approx(total_loglik(spec, p, data, gauss_hermite(15))).epsilon(1e-12));
}

TEST_CASE("analytic gradient matches finite differences on mixed data") {
  auto spec = mixed_spec();
  auto data = mixed_data(8, 21);
  Evaluator ev(spec, data, 9);
  auto theta = mixed_theta(ev.layout(), 13);
  std::vector<double> grad;
  ev.loglik_grad(theta, grad);
  for (int i = 0; i < ev.layout().size(); ++i) {
    double h = 1e-6 * (1.0 + std::fabs(theta[static_cast<size_t>(i)]));
    auto tp = theta, tm = theta;
    tp[static_cast<size_t>(i)] += h;
    tm[static_cast<size_t>(i)] -= h;
    double fd = (ev.loglik(tp) - ev.loglik(tm)) / (2 * h);
    CHECK(grad[static_cast<size_t>(i)] ==
          doctest::Approx(fd).epsilon(1e-4).scale(std::max(1.0, std::fabs(fd))));
  }
}

TEST_CASE("threaded evaluation is bit-identical to single-threaded") {
  auto spec = mixed_spec();
  auto data = mixed_data(23, 17);
  Evaluator ev1(spec, data, 15, 1);
  Evaluator ev4(spec, data, 15, 4);
  auto theta = mixed_theta(ev1.layout(), 29);
  std::vector<double> g1, g4;
  double l1 = ev1.loglik_grad(theta, g1);
  double l4 = ev4.loglik_grad(theta, g4);
  CHECK(l1 == l4);  // exact: deterministic ordered reduction
  for (size_t i = 0; i < g1.size(); ++i) CHECK(g1[i] == g4[i]);
}

TEST_CASE("node budget guards the tensor grid") {
  auto spec = mixed_spec();
  spec.random_effects.dim = 3;
  spec.random_effects.columns = {"x1", "x2"};
  auto data = mixed_data(3, 2);
  for (auto& cl : data)
    for (auto& o : cl.obs) o.z = {1.0, o.x[0], o.x[1]};
  CHECK_NOTHROW(Evaluator(spec, data, 15));
  CHECK_THROWS_AS(Evaluator(spec, data, 16), std::runtime_error);
}

TEST_CASE("support violations are reported with the cluster id") {
  auto spec = spec_one(ResponseType::Discrete, Family::Gumbel, ThresholdsSpec::shifted_log());
  Cluster cl;
  cl.id = "bad_cluster";
  cl.obs.push_back(obs_of(-1.0));
  Dataset data = {cl};
  try {
    Evaluator ev(spec, data, 5);
    FAIL("expected a domain error");
  } catch (const std::domain_error& e) {
    CHECK(std::string(e.what()).find("bad_cluster") != std::string::npos);
  }
}
