#ifndef MTM_IO_HPP
#define MTM_IO_HPP

#include <string>
#include <vector>

#include "mtm/model.hpp"
#include "mtm/penalty.hpp"

namespace mtm::io {

/// Penalty configuration carried by the spec file (all optional).
struct PenaltyOptions {
  PenaltySpec pspec;
  std::vector<double> lambda_grid;  // empty = default grid
  int folds = 5;
};

/// A parsed model-spec document.
struct SpecFile {
  ModelSpec model;
  PenaltyOptions penalty;
};

/// Parses and validates a JSON model-spec file. Errors carry the
/// offending field path (e.g. "measurements[2].family").
SpecFile parse_spec(const std::string& path);
SpecFile parse_spec_text(const std::string& text, const std::string& origin = "<spec>");

/// RFC 4180 CSV. read_csv returns rows of fields (header included);
/// handles quoted fields, embedded commas/quotes and CRLF line ends.
std::vector<std::vector<std::string>> read_csv(const std::string& path);
void write_csv(const std::string& path, const std::vector<std::vector<std::string>>& rows);
std::string csv_escape(const std::string& field);

struct IngestReport {
  int rows_total = 0;
  int rows_used = 0;
  int rows_dropped_missing_y = 0;
  std::vector<std::string> errors;  // row-anchored diagnostics
};

/// Reads a long-format CSV (cluster_id, measurement_id, y, covariate
/// columns, random-effect columns) into a Dataset grouped by cluster in
/// order of first appearance. Rows with an empty y cell are dropped and
/// counted. Malformed rows (bad numerics, unknown measurement ids,
/// support violations) are collected in the report; unless allow_drop
/// is set, any such row raises std::runtime_error listing the
/// diagnostics.
Dataset ingest(const std::string& path, const ModelSpec& spec, IngestReport& report,
               bool allow_drop = false);

/// Writes a dataset back to the long CSV format ingest() reads.
void write_dataset(const std::string& path, const ModelSpec& spec, const Dataset& data);

}  // namespace mtm::io

#endif
