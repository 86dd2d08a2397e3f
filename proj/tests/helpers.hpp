#ifndef MTM_TESTS_HELPERS_HPP
#define MTM_TESTS_HELPERS_HPP

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "mtm/model.hpp"

namespace testutil {

// Composite Simpson integration on [a, b].
inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 2000) {
  if (n % 2) ++n;
  double h = (b - a) / n;
  double acc = f(a) + f(b);
  for (int i = 1; i < n; ++i) acc += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

// Minimal one-measurement continuous spec with a random intercept.
inline mtm::ModelSpec one_measurement_spec(mtm::Family fam, mtm::ThresholdsSpec ts) {
  mtm::ModelSpec spec;
  mtm::Measurement m;
  m.id = "m1";
  m.type = mtm::ResponseType::Continuous;
  m.family = fam;
  m.thresholds = ts;
  spec.measurements.push_back(m);
  spec.random_effects.dim = 1;
  return spec;
}

// Data path relative to the repository root; tests run from the build
// tree, so the location is injected at configure time.
#ifndef MTM_DATA_DIR
#define MTM_DATA_DIR "data"
#endif
inline std::string data_file(const std::string& name) {
  return std::string(MTM_DATA_DIR) + "/" + name;
}

}  // namespace testutil

#endif
