#ifndef MTM_MODEL_HPP
#define MTM_MODEL_HPP

#include <string>
#include <vector>

#include "mtm/families.hpp"
#include "mtm/thresholds.hpp"

namespace mtm {

enum class ResponseType { Continuous, Discrete };
enum class Scope { Global, PerMeasurement };

struct Measurement {
  std::string id;
  ResponseType type = ResponseType::Continuous;
  Family family = Family::Normal;
  ThresholdsSpec thresholds;
};

struct Covariate {
  std::string name;
  Scope scope = Scope::Global;
};

/// Random effects b ~ N(0, Sigma), Sigma = L L^T. The design always
/// starts with an intercept (z[0] = 1); columns names the data columns
/// supplying the remaining dim - 1 entries (empty for a pure random
/// intercept).
struct RandomEffects {
  int dim = 1;
  std::vector<std::string> columns;
};

struct FitOptions {
  int quadrature_order = 15;
  int max_iterations = 5000;
  double grad_tol = 1e-5;
  int threads = 1;
  std::vector<double> start;  // optional packed starting values
};

struct ModelSpec {
  std::vector<Measurement> measurements;
  std::vector<Covariate> covariates;
  RandomEffects random_effects;
  bool homogeneous_dispersion = false;
  FitOptions options;

  int n_measurements() const { return static_cast<int>(measurements.size()); }
  int n_covariates() const { return static_cast<int>(covariates.size()); }
  int measurement_index(const std::string& id) const;  // -1 if absent

  /// Throws std::invalid_argument on structural problems (q out of
  /// range, discrete/continuous support mismatches, duplicate ids).
  void validate() const;
};

struct Observation {
  int measurement = 0;     // index into spec.measurements
  double y = 0.0;
  std::vector<double> x;   // one entry per spec covariate
  std::vector<double> z;   // random-effect design, length q
};

struct Cluster {
  std::string id;
  std::vector<Observation> obs;
};

using Dataset = std::vector<Cluster>;

/// Structured (constrained-scale) parameter values.
struct Parameters {
  // beta[s]: 1 entry for a global covariate, m entries per-measurement.
  std::vector<std::vector<double>> beta;
  std::vector<ThresholdsCoeffs> thresh;  // per measurement
  // Lower-triangular Cholesky factor of Sigma, row-major dense q x q.
  std::vector<double> chol;

  double chol_at(int q, int r, int c) const { return chol[static_cast<size_t>(r) * q + c]; }
};

/// Bijection between Parameters and the flat unconstrained vector the
/// optimizer works on. Slopes and Cholesky diagonals are exp-mapped;
/// free-threshold gaps are exp-mapped increments.
class ParamLayout {
 public:
  explicit ParamLayout(const ModelSpec& spec);

  int size() const { return size_; }

  std::vector<double> pack(const Parameters& p) const;
  Parameters unpack(const std::vector<double>& theta) const;

  /// Index of the coefficient of covariate s for measurement j in the
  /// packed vector (j is ignored for global covariates).
  int beta_index(int cov, int j) const;
  int thresh_intercept_index(int j) const;  // -1 for the free basis
  int thresh_slope_index(int j) const;      // shared slot if homogeneous; -1 for free
  int free_level_base(int j) const;         // first raw coefficient of a free block
  int chol_index(int r, int c) const;
  int chol_base() const { return chol_base_; }

  /// Human-readable name per packed slot, on the structured scale.
  std::vector<std::string> names() const;

  /// Structured-scale values per packed slot (beta unchanged; slopes,
  /// diagonals and free levels mapped through their transforms). Used
  /// for reporting and delta-method standard errors.
  std::vector<double> structured(const std::vector<double>& theta) const;

  const ModelSpec& spec() const { return *spec_; }

 private:
  const ModelSpec* spec_;
  int size_ = 0;
  std::vector<int> beta_base_;    // per covariate
  std::vector<int> thresh_base_;  // per measurement
  int shared_slope_ = -1;
  int chol_base_ = 0;
};

}  // namespace mtm

#endif
