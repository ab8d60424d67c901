#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "promptlab/metrics.hpp"

namespace promptlab {

// Everything the diagnostic tables need from one condition's run, recomputable
// from persisted artifacts alone.
struct ConditionTrajectory {
    std::string condition;
    double prevalence = 0.0;  // validation-split prevalence
    std::vector<Metrics> dev_metrics;                 // per iteration, t ascending
    std::vector<std::optional<Metrics>> val_metrics;  // per iteration
    std::size_t selected_index = 0;
};

// (to - from)/from as signed integer percent, rounded half away from zero.
int percent_delta(double from, double to);

struct DegradationRow {
    std::string condition;
    double prevalence = 0.0;
    double first_f1 = 0.0;  // first refinement iteration (t=1), validation set
    double final_f1 = 0.0;  // final iteration, validation set
    std::optional<int> delta_pct;  // empty when first F1 == 0 (division guard)
};

std::vector<DegradationRow> degradation_table(const std::vector<ConditionTrajectory>& inputs);
std::string degradation_csv(const std::vector<DegradationRow>& rows);

struct ComparisonEntry {
    std::string condition;
    double prevalence = 0.0;
    double optimized_f1 = 0.0;
    double lexicon_f1 = 0.0;
};

struct ComparisonRow : ComparisonEntry {
    std::optional<int> delta_pct;  // empty when lexicon F1 == 0 (division guard)
};

std::vector<ComparisonRow> comparison_table(const std::vector<ComparisonEntry>& entries);
std::string comparison_csv(const std::vector<ComparisonRow>& rows);

struct OscillationReport {
    double amplitude = 0.0;               // max - min validation sensitivity
    std::vector<int> collapse_iterations;  // val sensitivity == 0
    std::vector<int> masking_iterations;   // masking_flag true on val metrics
};

// Requires >= 2 iterations with validation metrics.
OscillationReport oscillation_report(const ConditionTrajectory& input);
nlohmann::ordered_json oscillation_json(const OscillationReport& report);

struct SelectedVsOptimalRow {
    std::string condition;
    std::size_t selected_index = 0;
    double selected_val_f1 = 0.0;
    std::size_t optimal_index = 0;  // argmax val F1, earliest tie-break
    double optimal_val_f1 = 0.0;
};

// Requires validation metrics for every iteration.
SelectedVsOptimalRow selected_vs_optimal(const ConditionTrajectory& input);
std::string selected_vs_optimal_csv(const std::vector<SelectedVsOptimalRow>& rows);

// Per-iteration validation sensitivity, the oscillation-figure data series.
std::string figure_csv(const ConditionTrajectory& input);

// report/ directory: degradation.csv, oscillation.json, selected_vs_optimal.csv,
// figure2a.csv. comparison.csv is written by the baseline command.
void write_report_dir(const std::filesystem::path& dir, const ConditionTrajectory& input);

}  // namespace promptlab
