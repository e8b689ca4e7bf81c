#pragma once

// JSON and CSV encodings for matrices, plans, routing decisions, training
// records, benchmark rows and model checkpoints.

#include "ssr/moe.hpp"

#include "json.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace ssr {

using json = nlohmann::json;

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shortest round-trip decimal text, '.' separator, independent of locale.
std::string format_double(double value);

/// {rows, cols, data: row-major array}
json matrix_to_json(const Matrix& m);
/// Throws FormatError when data length differs from rows * cols or entries are not numbers.
Matrix matrix_from_json(const json& j);

/// Headerless CSV, one matrix row per LF-terminated line.
std::string matrix_to_csv(const Matrix& m);
/// Throws FormatError on ragged rows, empty input or non-numeric fields.
Matrix matrix_from_csv(const std::string& text);
/// As matrix_from_csv, but also rejects a shape different from (rows, cols).
Matrix matrix_from_csv(const std::string& text, Index rows, Index cols);

std::string read_text_file(const std::filesystem::path& path);
/// Writes via a temporary sibling and rename.
void write_text_file(const std::filesystem::path& path, const std::string& content);

/// {branch, tokens: [{support, weights}]}
json decision_to_json(const RoutingDecision& decision);
json diagnostics_to_json(const SinkhornDiagnostics& diag);
json plan_to_json(const TransportPlan& plan);

/// Columns: step, loss, aux_loss, branch, load_entropy, load_cv, step_ms (top-k load).
std::string train_records_csv(const std::vector<TrainRecord>& records);
inline constexpr const char* kTrainCsvHeader = "step,loss,aux_loss,branch,load_entropy,load_cv,step_ms";

json checkpoint_to_json(const MoEBlock& block);
/// Restores parameters; the router config is left at its default.
MoEBlock block_from_checkpoint(const json& j);

}  // namespace ssr
