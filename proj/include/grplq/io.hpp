#pragma once

#include "grplq/certify.hpp"
#include "grplq/diagnostics.hpp"
#include "grplq/experiments.hpp"
#include "grplq/solver.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <string_view>

namespace grplq::io {

using Json = nlohmann::ordered_json;

/// Malformed CSV; carries the 1-based row and column of the offending cell.
class CsvError : public InvalidInput {
public:
    CsvError(const std::string& what, std::size_t row, std::size_t column)
        : InvalidInput(what), row(row), column(column)
    {
    }
    std::size_t row;
    std::size_t column;
};

/// Headerless, comma-separated, rectangular numeric table. Locale independent.
Matrix parse_csv(std::string_view text);
/// Comma-separated rows in shortest round-trip decimal form.
std::string format_csv(const Matrix& values);
std::string format_double(double value);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

/// SHA-256 of the bytes, lowercase hex.
std::string sha256_hex(std::string_view bytes);

/// {"sizes": [d_1, ..., d_p]}
GroupPartition parse_groups(std::string_view json_text);

Json to_json(const Vector& v);
Vector vector_from_json(const Json& j);

Json to_json(const KktCertificate& cert);
Json to_json(const FitResult& fit);
Json to_json(const PathResult& path);
Json to_json(const NormEstimate& est);
Json to_json(const KappaEstimate& kappa);
Json to_json(const DiagnosticsReport& report);
Json to_json(const ExperimentConfig& config);
Json to_json(const McReport& report);

ExperimentConfig config_from_json(const Json& j);

/// Flat per-n table of an McReport.
std::string mc_report_csv(const McReport& report);

} // namespace grplq::io
