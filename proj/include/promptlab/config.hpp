#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "promptlab/gateway.hpp"
#include "promptlab/pipeline.hpp"
#include "promptlab/simlab.hpp"

namespace promptlab {

enum class RunMode { sim, live };

std::string to_string(RunMode m);

// A corpus comes either from a JSONL file or from the deterministic synthetic
// generator.
struct DatasetSource {
    std::optional<std::filesystem::path> path;
    struct Synthetic {
        std::size_t n = 200;
        double prevalence = 0.03;
        std::uint64_t seed = 7;
    };
    std::optional<Synthetic> synthetic;

    bool configured() const { return path.has_value() || synthetic.has_value(); }
};

struct AppConfig {
    RunMode mode = RunMode::sim;
    std::string term = "brain fog";
    std::optional<std::filesystem::path> sop_path;
    std::optional<std::filesystem::path> templates_dir;

    DatasetSource dev;
    DatasetSource val;

    Thresholds thresholds;
    int t_max = 7;
    bool guiding_enabled = false;
    SelectionStrategy selection_strategy = SelectionStrategy::best_dev_f1;
    bool degradation_prevention = true;
    std::uint64_t seed = 1;
    int parallelism = 1;

    BackendConfig backend;

    SimParams sim_params;
    std::size_t sim_n = 400;
    double sim_prevalence = 0.03;  // single-run sim mode; simulate sweeps below
    std::vector<double> sweep_prevalences{0.03, 0.12, 0.23};
    std::size_t sweep_seeds = 50;
    bool write_all_traces = false;

    std::optional<std::filesystem::path> lexicon_path;
    std::optional<std::filesystem::path> compare_run;  // baseline vs. this run's selection

    std::filesystem::path out_dir = "runs/run";
};

// JSON, // comments allowed. Unknown top-level keys are rejected so typos
// fail loudly; missing keys fall back to the defaults above.
AppConfig load_config(const std::filesystem::path& path);

// Echo written into run.json; enough to re-derive the run.
nlohmann::ordered_json config_to_json(const AppConfig& config);

}  // namespace promptlab
