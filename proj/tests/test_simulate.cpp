#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "mtm/simulate.hpp"

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

}  // namespace

TEST_CASE("median draws hit the known medians") {
  // normal + linear, eta = 0: median of Y is -intercept/slope = 0
  auto sp = spec_one(ResponseType::Continuous, Family::Normal, ThresholdsSpec::linear());
  auto p = params_one(0.0, 1.0, 1.0);
  CHECK(sample_response(sp, p, 0, 0.0, 0.5) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  // normal + log, eta = 0: median is exp(0) = 1
  auto sl = spec_one(ResponseType::Continuous, Family::Normal, ThresholdsSpec::log());
  CHECK(sample_response(sl, p, 0, 0.0, 0.5) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("continuous draws invert the model cdf") {
  auto sp = spec_one(ResponseType::Continuous, Family::Gumbel, ThresholdsSpec::shifted_log());
  auto p = params_one(0.4, 1.3, 1.0);
  for (double u : {0.05, 0.3, 0.5, 0.77, 0.99}) {
    double eta = 0.6;
    double y = sample_response(sp, p, 0, eta, u);
    // P(Y <= y | eta) = 1 - F(eta - delta(y)) must equal u
    double back = 1.0 - cdf(Family::Gumbel, eta - eval(sp.measurements[0].thresholds, p.thresh[0], y));
    CHECK(back == doctest::Approx(u).epsilon(1e-10));
  }
}

TEST_CASE("discrete draws return the quantile level") {
  auto sp = spec_one(ResponseType::Discrete, Family::Normal, ThresholdsSpec::shifted_log());
  auto p = params_one(0.0, 1.0, 1.0);
  // at eta = 0: P(Y = 0) = 1 - F(0 - delta(0)) = 0.5, so u <= 0.5 -> 0
  CHECK(sample_response(sp, p, 0, 0.0, 0.25) == 0.0);
  CHECK(sample_response(sp, p, 0, 0.0, 0.4999) == 0.0);
  CHECK(sample_response(sp, p, 0, 0.0, 0.51) > 0.0);

  // bounded support never exceeds its top category
  auto so = spec_one(ResponseType::Discrete, Family::Logistic, ThresholdsSpec::free(3));
  Parameters po;
  po.thresh.resize(1);
  po.thresh[0].levels = {-0.5, 0.5};
  po.chol = {1.0};
  CHECK(sample_response(so, po, 0, 0.0, 0.999999) == 3.0);
  CHECK(sample_response(so, po, 0, 0.0, 1e-9) == 1.0);
}

TEST_CASE("count frequency matches the model probability") {
  auto sp = spec_one(ResponseType::Discrete, Family::Normal, ThresholdsSpec::shifted_log());
  auto p = params_one(0.0, 1.0, 1.0);
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  int zeros = 0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) {
    double u = unif(rng);
    if (u <= 0.0 || u >= 1.0) continue;
    if (sample_response(sp, p, 0, 0.0, u) == 0.0) ++zeros;
  }
  CHECK(std::fabs(static_cast<double>(zeros) / n - 0.5) < 0.002);
}

TEST_CASE("sample_dataset is deterministic and cluster-order stable") {
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
  spec.measurements = {a, b};
  spec.covariates = {{"x", Scope::Global}, {"trt", Scope::Global}};
  spec.random_effects.dim = 1;

  SimDesign d;
  d.spec = spec;
  d.true_params.beta = {{0.5}, {-0.3}};
  d.true_params.thresh.resize(2);
  d.true_params.thresh[0] = {0.2, 1.1, {}};
  d.true_params.thresh[1] = {-0.1, 0.9, {}};
  d.true_params.chol = {0.6};
  d.n_clusters = 30;
  d.covariate_gens = {CovariateGen::standard_normal(), CovariateGen::bernoulli(0.4)};
  d.seed = 777;

  auto r1 = sample_dataset(d);
  auto r2 = sample_dataset(d);
  REQUIRE(r1.data.size() == 30);
  REQUIRE(r1.random_effects.size() == 30);
  for (size_t i = 0; i < r1.data.size(); ++i) {
    REQUIRE(r1.data[i].obs.size() == r2.data[i].obs.size());
    CHECK(r1.data[i].id == r2.data[i].id);
    for (size_t j = 0; j < r1.data[i].obs.size(); ++j) {
      CHECK(r1.data[i].obs[j].y == r2.data[i].obs[j].y);  // bit-identical
      CHECK(r1.data[i].obs[j].x == r2.data[i].obs[j].x);
    }
  }

  // covariates are cluster-constant and the Bernoulli one is 0/1
  for (const auto& cl : r1.data) {
    REQUIRE(cl.obs.size() == 2);
    CHECK(cl.obs[0].x == cl.obs[1].x);
    double t = cl.obs[0].x[1];
    CHECK((t == 0.0 || t == 1.0));
  }

  // substreams: prefix of a longer run equals the shorter run
  SimDesign d2 = d;
  d2.n_clusters = 40;
  auto r3 = sample_dataset(d2);
  for (size_t i = 0; i < r1.data.size(); ++i)
    for (size_t j = 0; j < r1.data[i].obs.size(); ++j)
      CHECK(r3.data[i].obs[j].y == r1.data[i].obs[j].y);

  // a different seed actually changes the data
  SimDesign d3 = d;
  d3.seed = 778;
  auto r4 = sample_dataset(d3);
  bool any_diff = false;
  for (size_t i = 0; i < r1.data.size() && !any_diff; ++i)
    for (size_t j = 0; j < r1.data[i].obs.size(); ++j)
      any_diff = any_diff || r4.data[i].obs[j].y != r1.data[i].obs[j].y;
  CHECK(any_diff);
}

TEST_CASE("simulated moments track the model") {
  // continuous normal/linear with q = 1: marginally Y ~ N((eta0 - d0)/d,
  // (sd^2 + 1)/d^2) pooling across clusters
  auto sp = spec_one(ResponseType::Continuous, Family::Normal, ThresholdsSpec::linear());
  SimDesign d;
  d.spec = sp;
  d.true_params = params_one(-0.5, 1.25, 0.8);
  d.n_clusters = 20000;
  d.seed = 99;
  auto r = sample_dataset(d);
  double mean = 0.0, m2 = 0.0;
  int n = 0;
  for (const auto& cl : r.data)
    for (const auto& o : cl.obs) {
      mean += o.y;
      ++n;
    }
  mean /= n;
  for (const auto& cl : r.data)
    for (const auto& o : cl.obs) m2 += (o.y - mean) * (o.y - mean);
  m2 /= n - 1;
  CHECK(mean == doctest::Approx(0.5 / 1.25).epsilon(0.03));
  CHECK(m2 == doctest::Approx((0.8 * 0.8 + 1.0) / (1.25 * 1.25)).epsilon(0.03));
}

TEST_CASE("from_file covariates are used verbatim and validated") {
  auto sp = spec_one(ResponseType::Continuous, Family::Normal, ThresholdsSpec::linear());
  sp.covariates = {{"dose", Scope::Global}};
  SimDesign d;
  d.spec = sp;
  d.true_params = params_one(0.0, 1.0, 0.5);
  d.true_params.beta = {{1.0}};
  d.n_clusters = 3;
  d.covariate_gens = {CovariateGen::from_file({{0.1}, {0.2}, {0.3}})};
  d.seed = 5;
  auto r = sample_dataset(d);
  CHECK(r.data[0].obs[0].x[0] == 0.1);
  CHECK(r.data[1].obs[0].x[0] == 0.2);
  CHECK(r.data[2].obs[0].x[0] == 0.3);

  d.n_clusters = 4;  // more clusters than file rows
  CHECK_THROWS_AS(sample_dataset(d), std::invalid_argument);

  d.n_clusters = 3;
  d.covariate_gens.clear();  // generator count must match covariates
  CHECK_THROWS_AS(sample_dataset(d), std::invalid_argument);
}
