// Command-line front end: fit, test, path, cv and simulate subcommands
// around the mtm library. Writes CSV/JSON artifacts into --out.
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mtm/fit.hpp"
#include "mtm/io.hpp"
#include "mtm/penalty.hpp"
#include "mtm/simulate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Artifacts {
  fs::path dir;
  std::vector<fs::path> written;

  explicit Artifacts(const std::string& out) : dir(out) { fs::create_directories(dir); }
  fs::path file(const std::string& name) {
    fs::path p = dir / name;
    written.push_back(p);
    return p;
  }
  void remove_all() {
    for (const auto& p : written) {
      std::error_code ec;
      fs::remove(p, ec);
    }
  }
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void write_parameter_table(const fs::path& path, const mtm::FitResult& r) {
  std::vector<std::vector<std::string>> rows{{"name", "estimate", "std_error", "z_value"}};
  for (size_t i = 0; i < r.names.size(); ++i) {
    double se = r.std_errors[i];
    double z = se > 0.0 ? r.estimates[i] / se : std::numeric_limits<double>::quiet_NaN();
    rows.push_back({r.names[i], fmt(r.estimates[i]), std::isnan(se) ? "" : fmt(se),
                    std::isnan(z) ? "" : fmt(z)});
  }
  mtm::io::write_csv(path.string(), rows);
}

json summary_json(const mtm::FitResult& r, const mtm::io::IngestReport& report) {
  json s;
  s["loglik"] = r.loglik;
  s["aic"] = r.aic;
  s["n_params"] = r.n_params;
  s["converged"] = r.converged;
  s["iterations"] = r.iterations;
  s["grad_norm"] = r.grad_norm;
  s["se_available"] = r.se_available;
  s["ingestion"] = {{"rows_total", report.rows_total},
                    {"rows_used", report.rows_used},
                    {"rows_dropped_missing_y", report.rows_dropped_missing_y},
                    {"rows_rejected", report.errors.size()}};
  return s;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  out << j.dump(2) << "\n";
}

// Density of measurement j at covariate values x and b = 0, written as a
// (y, density) grid covering the central 99.9% of the distribution.
void write_density_grid(const fs::path& path, const mtm::ModelSpec& spec,
                        const mtm::Parameters& params, int j, const std::vector<double>& x) {
  const auto& meas = spec.measurements[static_cast<size_t>(j)];
  const auto& ts = meas.thresholds;
  double eta = 0.0;
  for (int s = 0; s < spec.n_covariates(); ++s) {
    const auto& block = params.beta[static_cast<size_t>(s)];
    double coef = spec.covariates[static_cast<size_t>(s)].scope == mtm::Scope::Global
                      ? block[0]
                      : block[static_cast<size_t>(j)];
    eta += coef * x[static_cast<size_t>(s)];
  }
  std::vector<std::vector<std::string>> rows{{"y", "density"}};
  mtm::Observation obs;
  obs.measurement = j;
  obs.x = x;
  obs.z.assign(static_cast<size_t>(spec.random_effects.dim), 0.0);
  std::vector<double> b(static_cast<size_t>(spec.random_effects.dim), 0.0);
  if (meas.type == mtm::ResponseType::Continuous) {
    const auto& tc = params.thresh[static_cast<size_t>(j)];
    double y_lo = mtm::inverse(ts, tc, eta - mtm::quantile(meas.family, 1.0 - 5e-4));
    double y_hi = mtm::inverse(ts, tc, eta - mtm::quantile(meas.family, 5e-4));
    const int n = 400;
    for (int i = 0; i <= n; ++i) {
      double y = y_lo + (y_hi - y_lo) * i / n;
      obs.y = y;
      rows.push_back({fmt(y), fmt(mtm::continuous_density(spec, params, obs, b))});
    }
  } else {
    auto sup = mtm::discrete_support(ts);
    double cum = 0.0;
    for (long r = sup.rmin; cum < 1.0 - 1e-4; ++r) {
      if (sup.bounded && r > sup.rmax) break;
      obs.y = static_cast<double>(r);
      double p = mtm::discrete_density(spec, params, obs, b);
      cum += p;
      rows.push_back({std::to_string(r), fmt(p)});
      if (r - sup.rmin > 100000) break;
    }
  }
  mtm::io::write_csv(path.string(), rows);
}

// Structured parameter values (name -> value) into a Parameters object.
mtm::Parameters params_from_named(const mtm::ModelSpec& spec,
                                  const std::map<std::string, double>& values) {
  for (const auto& name : mtm::ParamLayout(spec).names())
    if (!values.count(name))
      throw std::runtime_error("params file is missing a value for " + name);
  mtm::Parameters p;
  const int m = spec.n_measurements();
  const int q = spec.random_effects.dim;
  p.beta.resize(static_cast<size_t>(spec.n_covariates()));
  for (int s = 0; s < spec.n_covariates(); ++s) {
    const auto& cov = spec.covariates[static_cast<size_t>(s)];
    if (cov.scope == mtm::Scope::Global) {
      p.beta[static_cast<size_t>(s)] = {values.at("beta." + cov.name)};
    } else {
      for (int j = 0; j < m; ++j)
        p.beta[static_cast<size_t>(s)].push_back(
            values.at("beta." + cov.name + "." + spec.measurements[static_cast<size_t>(j)].id));
    }
  }
  p.thresh.resize(static_cast<size_t>(m));
  for (int j = 0; j < m; ++j) {
    const auto& meas = spec.measurements[static_cast<size_t>(j)];
    auto& tc = p.thresh[static_cast<size_t>(j)];
    if (meas.thresholds.is_free()) {
      for (int r = 1; r <= meas.thresholds.k - 1; ++r)
        tc.levels.push_back(values.at("thresh." + meas.id + ".level" + std::to_string(r)));
      for (size_t r = 1; r < tc.levels.size(); ++r)
        if (tc.levels[r] <= tc.levels[r - 1])
          throw std::runtime_error("thresh." + meas.id + " levels must be strictly increasing");
    } else {
      tc.intercept = values.at("thresh." + meas.id + ".intercept");
      tc.slope = values.at(spec.homogeneous_dispersion ? "thresh.slope"
                                                       : "thresh." + meas.id + ".slope");
      if (!(tc.slope > 0.0))
        throw std::runtime_error("thresh." + meas.id + ".slope must be positive");
    }
  }
  p.chol.assign(static_cast<size_t>(q) * q, 0.0);
  if (q == 1) {
    double sd = values.at("re.sd");
    if (!(sd > 0.0)) throw std::runtime_error("re.sd must be positive");
    p.chol[0] = sd;
  } else {
    for (int r = 0; r < q; ++r)
      for (int c = 0; c <= r; ++c) {
        double v = values.at("re.L" + std::to_string(r + 1) + std::to_string(c + 1));
        if (r == c && !(v > 0.0))
          throw std::runtime_error("re.L diagonal entries must be positive");
        p.chol[static_cast<size_t>(r) * q + c] = v;
      }
  }
  return p;
}

mtm::CovariateGen parse_generator(const std::string& text) {
  if (text == "normal") return mtm::CovariateGen::standard_normal();
  double prob;
  if (std::sscanf(text.c_str(), "bernoulli(%lf)", &prob) == 1) {
    if (!(prob > 0.0 && prob < 1.0))
      throw std::runtime_error("bernoulli probability must be in (0,1)");
    return mtm::CovariateGen::bernoulli(prob);
  }
  throw std::runtime_error("unknown covariate generator \"" + text +
                           "\" (expected normal or bernoulli(p))");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixed thresholds model fitting for clustered data"};
  app.require_subcommand(1);

  std::string spec_path, data_path, out_dir = ".", params_path;
  int order = 0, threads = 1, n_clusters = 0, folds = 0;
  std::uint64_t seed = 1;
  bool allow_drop = false, density_grid = false;
  std::vector<std::string> at_values, gen_specs;

  auto add_common = [&](CLI::App* sub, bool needs_data) {
    sub->add_option("--spec", spec_path, "Model spec JSON file")->required();
    if (needs_data) sub->add_option("--data", data_path, "Long-format CSV data")->required();
    sub->add_option("--out", out_dir, "Output directory (default: current)");
    sub->add_option("--order", order, "Quadrature order override");
    sub->add_option("--threads", threads, "Worker threads for likelihood evaluation");
    sub->add_flag("--allow-drop", allow_drop, "Drop bad rows instead of failing");
  };

  auto* c_fit = app.add_subcommand("fit", "Maximum likelihood fit");
  add_common(c_fit, true);
  c_fit->add_flag("--density-grid", density_grid, "Emit per-measurement density grids");
  c_fit->add_option("--at", at_values, "Covariate value for density grids, name=value");

  auto* c_test = app.add_subcommand("test", "Global-vs-varying LR tests per covariate");
  add_common(c_test, true);

  auto* c_path = app.add_subcommand("path", "Penalized regularization path");
  add_common(c_path, true);

  auto* c_cv = app.add_subcommand("cv", "Cross-validated lambda selection");
  add_common(c_cv, true);
  c_cv->add_option("--seed", seed, "Fold-assignment seed");
  c_cv->add_option("--folds", folds, "Number of folds (default from spec, else 5)");

  auto* c_sim = app.add_subcommand("simulate", "Draw a dataset from given parameters");
  add_common(c_sim, false);
  c_sim->add_option("--params", params_path, "CSV of name,value (structured scale)")->required();
  c_sim->add_option("--n-clusters", n_clusters, "Number of clusters")->required();
  c_sim->add_option("--seed", seed, "Simulation seed");
  c_sim->add_option("--gen", gen_specs,
                    "Covariate generator, name=normal|bernoulli(p) (default normal)");

  CLI11_PARSE(app, argc, argv);

  Artifacts art(out_dir);
  try {
    auto specfile = mtm::io::parse_spec(spec_path);
    mtm::ModelSpec& spec = specfile.model;
    if (order > 0) spec.options.quadrature_order = order;
    spec.options.threads = threads;

    mtm::io::IngestReport report;
    mtm::Dataset data;
    if (!data_path.empty()) data = mtm::io::ingest(data_path, spec, report, allow_drop);

    if (*c_fit) {
      auto r = mtm::fit(spec, data);
      write_parameter_table(art.file("parameters.csv"), r);
      write_json(art.file("summary.json"), summary_json(r, report));
      if (density_grid) {
        std::vector<double> x(static_cast<size_t>(spec.n_covariates()), 0.0);
        for (const auto& kv : at_values) {
          auto eq = kv.find('=');
          if (eq == std::string::npos) throw std::runtime_error("--at expects name=value");
          std::string name = kv.substr(0, eq);
          bool found = false;
          for (int s = 0; s < spec.n_covariates(); ++s)
            if (spec.covariates[static_cast<size_t>(s)].name == name) {
              x[static_cast<size_t>(s)] = std::stod(kv.substr(eq + 1));
              found = true;
            }
          if (!found) throw std::runtime_error("--at: unknown covariate " + name);
        }
        for (int j = 0; j < spec.n_measurements(); ++j)
          write_density_grid(
              art.file("density_" + spec.measurements[static_cast<size_t>(j)].id + ".csv"), spec,
              r.params, j, x);
      }
      if (!r.converged) {
        std::cerr << "mtm fit: did not converge (gradient norm " << r.grad_norm << ")\n";
        return 2;
      }
      return 0;
    }

    if (*c_test) {
      auto scan = mtm::global_vs_varying_scan(spec, data);
      std::vector<std::vector<std::string>> rows{
          {"covariate", "loglik_reduced", "lr_statistic", "df", "p_value", "error"}};
      for (const auto& e : scan) {
        if (e.ok)
          rows.push_back({e.covariate, fmt(e.loglik_reduced), fmt(e.test.statistic),
                          std::to_string(e.test.df), fmt(e.test.p_value), ""});
        else
          rows.push_back({e.covariate, "", "", "", "", e.error});
      }
      mtm::io::write_csv(art.file("lr_tests.csv").string(), rows);
      for (const auto& e : scan)
        if (!e.ok) {
          std::cerr << "mtm test: fit failed for " << e.covariate << ": " << e.error << "\n";
          return 2;
        }
      return 0;
    }

    if (*c_path || *c_cv) {
      auto grid = specfile.penalty.lambda_grid.empty() ? mtm::default_lambda_grid()
                                                       : specfile.penalty.lambda_grid;
      mtm::PathResult pr;
      if (*c_cv) {
        int k = folds > 0 ? folds : specfile.penalty.folds;
        pr = mtm::cross_validate(spec, data, grid, k, seed, specfile.penalty.pspec);
      } else {
        pr = mtm::path(spec, data, grid, specfile.penalty.pspec);
      }
      std::vector<std::vector<std::string>> rows{{"lambda", "covariate", "measurement", "value"}};
      mtm::ParamLayout layout(spec);
      for (const auto& e : pr.entries) {
        if (!e.ok) continue;
        for (int s = 0; s < spec.n_covariates(); ++s) {
          const auto& cov = spec.covariates[static_cast<size_t>(s)];
          if (cov.scope != mtm::Scope::PerMeasurement) continue;
          for (int j = 0; j < spec.n_measurements(); ++j)
            rows.push_back({fmt(e.lambda), cov.name,
                            spec.measurements[static_cast<size_t>(j)].id,
                            fmt(e.fit.theta[static_cast<size_t>(layout.beta_index(s, j))])});
        }
      }
      mtm::io::write_csv(art.file("path.csv").string(), rows);

      std::vector<std::vector<std::string>> frows{
          {"lambda", "covariate", "max_pair_diff", "block_norm", "fused"}};
      for (const auto& e : pr.entries)
        for (const auto& d : e.diag)
          frows.push_back({fmt(e.lambda), d.covariate, fmt(d.max_pair_diff), fmt(d.block_norm),
                           d.fused ? "1" : "0"});
      mtm::io::write_csv(art.file("fusion.csv").string(), frows);

      if (*c_cv) {
        std::vector<std::vector<std::string>> crows{{"lambda", "mean_cv_loss", "se_cv_loss"}};
        for (size_t l = 0; l < pr.lambdas.size(); ++l)
          crows.push_back({fmt(pr.lambdas[l]), fmt(pr.cv_loss[l]), fmt(pr.cv_se[l])});
        mtm::io::write_csv(art.file("cv.csv").string(), crows);
        json s;
        s["best_lambda"] = pr.lambdas[static_cast<size_t>(pr.best_index)];
        s["best_cv_loss"] = pr.cv_loss[static_cast<size_t>(pr.best_index)];
        write_json(art.file("cv_summary.json"), s);
      }
      for (const auto& e : pr.entries)
        if (!e.ok) {
          std::cerr << "mtm path: fit failed at lambda " << e.lambda << ": " << e.error << "\n";
          return 2;
        }
      return 0;
    }

    if (*c_sim) {
      std::map<std::string, double> values;
      for (const auto& row : mtm::io::read_csv(params_path)) {
        if (row.size() < 2 || row[0] == "name") continue;
        values[row[0]] = std::stod(row[1]);
      }
      mtm::SimDesign design;
      design.spec = spec;
      design.true_params = params_from_named(spec, values);
      design.n_clusters = n_clusters;
      design.seed = seed;
      design.covariate_gens.assign(static_cast<size_t>(spec.n_covariates()),
                                   mtm::CovariateGen::standard_normal());
      for (const auto& g : gen_specs) {
        auto eq = g.find('=');
        if (eq == std::string::npos) throw std::runtime_error("--gen expects name=generator");
        std::string name = g.substr(0, eq);
        bool found = false;
        for (int s = 0; s < spec.n_covariates(); ++s)
          if (spec.covariates[static_cast<size_t>(s)].name == name) {
            design.covariate_gens[static_cast<size_t>(s)] = parse_generator(g.substr(eq + 1));
            found = true;
          }
        if (!found) throw std::runtime_error("--gen: unknown covariate " + name);
      }
      auto sim = mtm::sample_dataset(design);
      mtm::io::write_dataset(art.file("simulated.csv").string(), spec, sim.data);
      return 0;
    }
  } catch (const std::exception& e) {
    art.remove_all();
    std::cerr << "mtm: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
