#pragma once

#include <filesystem>
#include <optional>

#include <nlohmann/json.hpp>

#include "promptlab/pipeline.hpp"

namespace promptlab {

nlohmann::ordered_json metrics_to_json(const Metrics& m);
Metrics metrics_from_json(const nlohmann::json& j);

nlohmann::ordered_json prompt_to_json(const Prompt& p);
Prompt prompt_from_json(const nlohmann::json& j);

nlohmann::ordered_json trajectory_to_json(const Trajectory& t,
                                          const std::optional<ValidationReport>& validation);

struct RunArtifacts {
    nlohmann::ordered_json run_config;
    Trajectory trajectory;  // without in-memory predictions/critiques
    std::optional<ValidationReport> validation;
};

// Layout: run.json, iteration_<t>/{prompt.txt, metrics.json, critiques.jsonl,
// predictions.jsonl}, trajectory.json. Deterministic byte-for-byte for
// identical inputs.
void write_run_artifacts(const std::filesystem::path& dir,
                         const nlohmann::ordered_json& run_config, Trajectory& trajectory,
                         const std::optional<ValidationReport>& validation);

// Throws LoadError naming the first missing or truncated file.
RunArtifacts load_run_artifacts(const std::filesystem::path& dir);

}  // namespace promptlab
