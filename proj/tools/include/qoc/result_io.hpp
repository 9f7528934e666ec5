#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "qoc/scenario.hpp"

namespace qoc {

[[nodiscard]] nlohmann::json to_json(const OptimResult &r);
[[nodiscard]] OptimResult optim_result_from_json(const nlohmann::json &j);
[[nodiscard]] nlohmann::json to_json(const FilterFunctionResult &ff);

/// The reproducible result document: everything except wall-clock data.
[[nodiscard]] nlohmann::json result_document(const ScenarioConfig &cfg, const ScenarioRun &run);
/// Runtime statistics and timestamps, kept apart from the result document.
[[nodiscard]] nlohmann::json timing_document(const ScenarioRun &run, double wall_seconds);

/// Writes next to the target and renames over it.
void write_file_atomic(const std::filesystem::path &path, const std::string &content);
[[nodiscard]] nlohmann::json read_json_file(const std::filesystem::path &path);

struct ExportSelection {
  /// Stage name or index; empty picks the last stage.
  std::string stage;
  /// Start index; negative picks the best start of the stage.
  long start = -1;
};

/// CSV exports from a result document.
[[nodiscard]] std::string export_pulse_csv(const nlohmann::json &doc, const ExportSelection &sel);
[[nodiscard]] std::string export_costs_csv(const nlohmann::json &doc, const ExportSelection &sel);
[[nodiscard]] std::string export_filter_function_csv(const nlohmann::json &doc,
                                                     const ExportSelection &sel);

}  // namespace qoc
