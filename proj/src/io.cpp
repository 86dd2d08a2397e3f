#include "mtm/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace mtm::io {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& field, const std::string& what) {
  throw std::runtime_error("spec error at " + field + ": " + what);
}

double require_number(const json& j, const std::string& field) {
  if (!j.is_number()) fail(field, "expected a number");
  return j.get<double>();
}

std::string require_string(const json& j, const std::string& field) {
  if (!j.is_string()) fail(field, "expected a string");
  return j.get<std::string>();
}

ThresholdsSpec parse_thresholds(const json& m, const std::string& field, ResponseType type) {
  if (!m.contains("thresholds")) fail(field + ".thresholds", "missing");
  std::string text = require_string(m["thresholds"], field + ".thresholds");
  // Ordinal conveniences: "logit" / "free" plus a categories count.
  if ((text == "logit" || text == "free") && m.contains("categories")) {
    int k = static_cast<int>(require_number(m["categories"], field + ".categories"));
    if (k < 2) fail(field + ".categories", "need at least 2 categories");
    text = text == "free" ? "free(" + std::to_string(k) + ")"
                          : "logit(0.9," + std::to_string(k) + ")";
  }
  try {
    auto ts = ThresholdsSpec::parse(text);
    if (ts.basis == Basis::Linear && type == ResponseType::Discrete)
      fail(field + ".thresholds", "linear thresholds have no discrete support");
    return ts;
  } catch (const std::exception& e) {
    fail(field + ".thresholds", e.what());
  }
}

}  // namespace

SpecFile parse_spec_text(const std::string& text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(origin + ": not valid JSON: " + e.what());
  }
  SpecFile out;
  ModelSpec& spec = out.model;

  if (!doc.contains("measurements") || !doc["measurements"].is_array() ||
      doc["measurements"].empty())
    fail("measurements", "required non-empty array");
  int mi = 0;
  for (const auto& m : doc["measurements"]) {
    std::string field = "measurements[" + std::to_string(mi++) + "]";
    Measurement meas;
    if (!m.contains("id")) fail(field + ".id", "missing");
    meas.id = require_string(m["id"], field + ".id");
    std::string type = m.contains("type") ? require_string(m["type"], field + ".type")
                                          : std::string("continuous");
    if (type == "continuous") {
      meas.type = ResponseType::Continuous;
    } else if (type == "discrete" || type == "count" || type == "ordinal") {
      meas.type = ResponseType::Discrete;
    } else {
      fail(field + ".type", "expected continuous|discrete|count|ordinal, got \"" + type + "\"");
    }
    std::string fam = m.contains("family") ? require_string(m["family"], field + ".family")
                                           : std::string("normal");
    try {
      meas.family = family_from_name(fam);
    } catch (const std::exception& e) {
      fail(field + ".family", e.what());
    }
    meas.thresholds = parse_thresholds(m, field, meas.type);
    spec.measurements.push_back(std::move(meas));
  }

  if (doc.contains("covariates")) {
    if (!doc["covariates"].is_array()) fail("covariates", "expected an array");
    int ci = 0;
    for (const auto& c : doc["covariates"]) {
      std::string field = "covariates[" + std::to_string(ci++) + "]";
      Covariate cov;
      if (!c.contains("name")) fail(field + ".name", "missing");
      cov.name = require_string(c["name"], field + ".name");
      std::string scope = c.contains("scope") ? require_string(c["scope"], field + ".scope")
                                              : std::string("global");
      if (scope == "global") {
        cov.scope = Scope::Global;
      } else if (scope == "per_measurement" || scope == "varying") {
        cov.scope = Scope::PerMeasurement;
      } else {
        fail(field + ".scope", "expected global|per_measurement, got \"" + scope + "\"");
      }
      spec.covariates.push_back(std::move(cov));
    }
  }

  if (doc.contains("random_effects")) {
    const auto& re = doc["random_effects"];
    if (re.contains("dim"))
      spec.random_effects.dim = static_cast<int>(require_number(re["dim"], "random_effects.dim"));
    if (re.contains("columns")) {
      if (!re["columns"].is_array()) fail("random_effects.columns", "expected an array");
      for (const auto& c : re["columns"])
        spec.random_effects.columns.push_back(require_string(c, "random_effects.columns[]"));
    }
  }

  if (doc.contains("homogeneous_dispersion")) {
    if (!doc["homogeneous_dispersion"].is_boolean())
      fail("homogeneous_dispersion", "expected a boolean");
    spec.homogeneous_dispersion = doc["homogeneous_dispersion"].get<bool>();
  }

  if (doc.contains("options")) {
    const auto& o = doc["options"];
    if (o.contains("quadrature_order"))
      spec.options.quadrature_order =
          static_cast<int>(require_number(o["quadrature_order"], "options.quadrature_order"));
    if (o.contains("max_iterations"))
      spec.options.max_iterations =
          static_cast<int>(require_number(o["max_iterations"], "options.max_iterations"));
    if (o.contains("grad_tol"))
      spec.options.grad_tol = require_number(o["grad_tol"], "options.grad_tol");
    if (o.contains("threads"))
      spec.options.threads = static_cast<int>(require_number(o["threads"], "options.threads"));
  }

  if (doc.contains("penalty")) {
    const auto& p = doc["penalty"];
    if (p.contains("epsilon"))
      out.penalty.pspec.epsilon = require_number(p["epsilon"], "penalty.epsilon");
    if (p.contains("lambda"))
      out.penalty.pspec.lambda = require_number(p["lambda"], "penalty.lambda");
    if (p.contains("adjacent_only")) {
      if (!p["adjacent_only"].is_boolean()) fail("penalty.adjacent_only", "expected a boolean");
      out.penalty.pspec.adjacent_only = p["adjacent_only"].get<bool>();
    }
    if (p.contains("covariates")) {
      if (!p["covariates"].is_array()) fail("penalty.covariates", "expected an array");
      for (const auto& c : p["covariates"])
        out.penalty.pspec.covariates.push_back(require_string(c, "penalty.covariates[]"));
    }
    if (p.contains("folds"))
      out.penalty.folds = static_cast<int>(require_number(p["folds"], "penalty.folds"));
    if (p.contains("lambda_grid")) {
      if (!p["lambda_grid"].is_array()) fail("penalty.lambda_grid", "expected an array");
      for (const auto& l : p["lambda_grid"])
        out.penalty.lambda_grid.push_back(require_number(l, "penalty.lambda_grid[]"));
    }
  }

  try {
    spec.validate();
  } catch (const std::exception& e) {
    throw std::runtime_error(origin + ": " + e.what());
  }
  return out;
}

SpecFile parse_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open spec file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_spec_text(buf.str(), path);
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false, field_started = false;
  int c;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(std::move(row));
    row.clear();
  };
  while ((c = in.get()) != EOF) {
    char ch = static_cast<char>(c);
    if (in_quotes) {
      if (ch == '"') {
        if (in.peek() == '"') {
          field.push_back('"');
          in.get();
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(ch);
      }
    } else if (ch == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (ch == ',') {
      end_field();
    } else if (ch == '\n') {
      end_row();
    } else if (ch == '\r') {
      // swallowed; \r\n ends the row at the \n
    } else {
      field.push_back(ch);
      field_started = true;
    }
  }
  if (in_quotes) throw std::runtime_error(path + ": unterminated quoted field");
  if (field_started || !row.empty()) end_row();
  return rows;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

void write_csv(const std::string& path, const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << csv_escape(row[i]);
    }
    out << '\n';
  }
}

Dataset ingest(const std::string& path, const ModelSpec& spec, IngestReport& report,
               bool allow_drop) {
  auto rows = read_csv(path);
  report = IngestReport{};
  if (rows.empty()) throw std::runtime_error(path + ": empty file");
  const auto& header = rows[0];
  auto col = [&](const std::string& name) {
    for (size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  };
  int c_cluster = col("cluster_id"), c_meas = col("measurement_id"), c_y = col("y");
  if (c_cluster < 0) throw std::runtime_error(path + ": missing column cluster_id");
  if (c_meas < 0) throw std::runtime_error(path + ": missing column measurement_id");
  if (c_y < 0) throw std::runtime_error(path + ": missing column y");
  std::vector<int> c_x;
  for (const auto& cov : spec.covariates) {
    int c = col(cov.name);
    if (c < 0) throw std::runtime_error(path + ": missing covariate column " + cov.name);
    c_x.push_back(c);
  }
  std::vector<int> c_z;
  for (const auto& name : spec.random_effects.columns) {
    int c = col(name);
    if (c < 0) throw std::runtime_error(path + ": missing random-effect column " + name);
    c_z.push_back(c);
  }
  const int q = spec.random_effects.dim;
  if (static_cast<int>(c_z.size()) + 1 != q && !(q == 1 && c_z.empty()))
    throw std::runtime_error(path + ": random-effect columns must number q - 1 (intercept implied)");

  Dataset data;
  auto cluster_of = [&](const std::string& id) -> Cluster& {
    for (auto& cl : data)
      if (cl.id == id) return cl;
    data.push_back(Cluster{id, {}});
    return data.back();
  };

  auto parse_num = [](const std::string& s, double& out) {
    try {
      size_t pos = 0;
      out = std::stod(s, &pos);
      while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
      return pos == s.size();
    } catch (...) {
      return false;
    }
  };

  for (size_t ri = 1; ri < rows.size(); ++ri) {
    const auto& row = rows[ri];
    if (row.size() == 1 && row[0].empty()) continue;  // blank line
    ++report.rows_total;
    std::string where = "row " + std::to_string(ri + 1);
    if (row.size() != header.size()) {
      report.errors.push_back(where + ": expected " + std::to_string(header.size()) +
                              " fields, got " + std::to_string(row.size()));
      continue;
    }
    const std::string& ys = row[static_cast<size_t>(c_y)];
    if (ys.empty() || ys == "NA") {
      ++report.rows_dropped_missing_y;
      continue;
    }
    int j = spec.measurement_index(row[static_cast<size_t>(c_meas)]);
    if (j < 0) {
      report.errors.push_back(where + ": unknown measurement_id \"" +
                              row[static_cast<size_t>(c_meas)] + "\"");
      continue;
    }
    Observation obs;
    obs.measurement = j;
    if (!parse_num(ys, obs.y)) {
      report.errors.push_back(where + ": unparseable y \"" + ys + "\"");
      continue;
    }
    bool bad = false;
    for (size_t s = 0; s < c_x.size(); ++s) {
      double v;
      if (!parse_num(row[static_cast<size_t>(c_x[s])], v)) {
        report.errors.push_back(where + ": unparseable " + spec.covariates[s].name + " \"" +
                                row[static_cast<size_t>(c_x[s])] + "\"");
        bad = true;
        break;
      }
      obs.x.push_back(v);
    }
    if (bad) continue;
    obs.z.push_back(1.0);
    for (size_t r = 0; r < c_z.size(); ++r) {
      double v;
      if (!parse_num(row[static_cast<size_t>(c_z[r])], v)) {
        report.errors.push_back(where + ": unparseable " + spec.random_effects.columns[r]);
        bad = true;
        break;
      }
      obs.z.push_back(v);
    }
    if (bad) continue;

    // Support check.
    const auto& meas = spec.measurements[static_cast<size_t>(j)];
    if (meas.type == ResponseType::Discrete) {
      long r = std::lround(obs.y);
      auto sup = discrete_support(meas.thresholds);
      if (std::fabs(obs.y - r) > 1e-9 || r < sup.rmin || (sup.bounded && r > sup.rmax)) {
        report.errors.push_back(where + ": y=" + ys + " outside the support of measurement " +
                                meas.id);
        continue;
      }
    } else {
      auto sup = continuous_support(meas.thresholds);
      if (!(obs.y > sup.lo && obs.y < sup.hi)) {
        report.errors.push_back(where + ": y=" + ys + " outside the support of measurement " +
                                meas.id);
        continue;
      }
    }

    cluster_of(row[static_cast<size_t>(c_cluster)]).obs.push_back(std::move(obs));
    ++report.rows_used;
  }

  if (!report.errors.empty() && !allow_drop) {
    std::string msg = path + ": " + std::to_string(report.errors.size()) + " bad row(s)";
    size_t show = std::min<size_t>(report.errors.size(), 5);
    for (size_t i = 0; i < show; ++i) msg += "\n  " + report.errors[i];
    if (report.errors.size() > show) msg += "\n  ...";
    throw std::runtime_error(msg);
  }
  if (report.rows_used == 0) throw std::runtime_error(path + ": no usable data rows");
  return data;
}

void write_dataset(const std::string& path, const ModelSpec& spec, const Dataset& data) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header = {"cluster_id", "measurement_id", "y"};
  for (const auto& cov : spec.covariates) header.push_back(cov.name);
  for (const auto& c : spec.random_effects.columns) header.push_back(c);
  rows.push_back(header);
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const auto& cl : data)
    for (const auto& obs : cl.obs) {
      std::vector<std::string> row = {cl.id,
                                      spec.measurements[static_cast<size_t>(obs.measurement)].id,
                                      num(obs.y)};
      for (double v : obs.x) row.push_back(num(v));
      for (size_t r = 1; r < obs.z.size(); ++r) row.push_back(num(obs.z[r]));
      rows.push_back(std::move(row));
    }
  write_csv(path, rows);
}

}  // namespace mtm::io
