#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rholab/report.hpp"

namespace rholab::experiment {

// Experiment kinds accepted in the "kind" field of a config.
const std::vector<std::string>& kinds();

// Fills every default of the config in place and validates all sections.
// Throws ValidationError whose message starts with the offending config path.
nlohmann::json resolve_config(const nlohmann::json& config);

// FNV-1a of the canonical dump of a resolved config.
std::string config_hash(const nlohmann::json& resolved);

struct RunResult {
    int exit_code = 0;  // 0 ok, 2 validation, 3 numerical, 4 infeasible
    std::string message;
    nlohmann::json manifest;
    std::vector<std::string> files;  // written, relative to the output directory
    std::string report_csv;          // body of the main report
};

// Resolves, runs and writes <kind>.csv (or path.csv + value.json for
// schilder) and manifest.json into output_dir. `seed` overrides the config
// seed. Never throws for experiment errors; they are mapped to exit codes.
RunResult run(nlohmann::json config, const std::string& output_dir, std::optional<unsigned long long> seed = {});

nlohmann::json load_config(const std::string& path);

// Report CSV read back with gap recomputed from the prelimit and limit columns
// (when present) and rows sorted by the first column.
CsvTable load_report(const std::string& path);

struct CompareResult {
    int exit_code = 0;  // 0 within tolerance, 1 exceeded, 2 mismatched schemas
    std::string message;
    CsvTable diff;  // index, gap_a, gap_b, delta, tolerance, exceeded
};

// Row-aligned gap differences delta = gap_b - gap_a. The per-row tolerance is
// max(tolerance, se_multiple * sqrt(se_a^2 + se_b^2)) when both reports carry
// an `se` column.
CompareResult compare(const std::string& report_a, const std::string& report_b, double tolerance,
                      double se_multiple = 0.0);

}  // namespace rholab::experiment
