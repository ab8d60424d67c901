#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "promptlab/agents.hpp"
#include "promptlab/dataset.hpp"
#include "promptlab/metrics.hpp"

namespace promptlab {

struct Thresholds {
    double theta_sensitivity = 0.9;
    double theta_specificity = 0.9;
};

enum class TargetMetric { sensitivity, specificity, none };
enum class ConvergenceStatus { converged, improve_sensitivity, improve_specificity };
enum class SelectionStrategy { final_iteration, best_dev_f1 };
enum class TerminationReason { converged, max_iterations, all_critiques_filtered };

std::string to_string(TargetMetric t);
std::string to_string(SelectionStrategy s);
std::string to_string(TerminationReason r);
SelectionStrategy selection_strategy_from_string(const std::string& s);
TargetMetric target_metric_from_string(const std::string& s);
TerminationReason termination_reason_from_string(const std::string& s);

struct IterationRecord {
    int t = 0;
    Prompt prompt;
    Metrics dev_metrics;
    TargetMetric target_metric = TargetMetric::none;
    std::size_t critique_count = 0;  // critiques generated while producing P_{t+1}
    std::size_t filtered_count = 0;  // of those, dropped as non-actionable
    bool reverted = false;           // this prompt was produced by a revert synthesis
    std::optional<GuidanceDirective> guidance;
    std::string predictions_ref;  // artifact path once persisted

    std::vector<Prediction> predictions;  // corpus order
    std::vector<Critique> critiques;      // generated this iteration, incl. filtered
};

struct Trajectory {
    std::vector<IterationRecord> records;
    std::optional<std::size_t> selected_index;
    SelectionStrategy selection_strategy = SelectionStrategy::best_dev_f1;
    Thresholds thresholds;
    int t_max = 7;
    TerminationReason termination_reason = TerminationReason::max_iterations;
};

struct RunOptions {
    int t_max = 7;
    bool guiding_enabled = false;
    SelectionStrategy selection_strategy = SelectionStrategy::best_dev_f1;
    bool degradation_prevention = true;
    // Compare against the best F1 so far instead of the immediately previous
    // iteration when deciding whether to revert.
    bool compare_best_so_far = false;
    int parallelism = 1;
};

// One prediction per note, corpus order, full confusion only (a backend
// failure aborts the evaluation rather than reporting a partial count).
std::pair<std::vector<Prediction>, Metrics> evaluate(const AgentRunner& runner,
                                                     const Prompt& prompt, const SOP& sop,
                                                     const Corpus& corpus, int parallelism = 1);

// Converged iff both metrics meet their thresholds; otherwise the single
// failing metric is targeted, sensitivity first when both fail. Undefined
// metrics compare as failing.
ConvergenceStatus check_convergence(const Metrics& m, const Thresholds& th);

Trajectory run_development(const AgentRunner& runner, const Prompt& p0, const SOP& sop,
                           const Corpus& dev, const Thresholds& th, const RunOptions& options);

// best_dev_f1: argmax of dev F1, earliest tie-break. final_iteration: last.
std::size_t select(const Trajectory& trajectory);

struct ValidationReport {
    std::vector<std::optional<Metrics>> per_record;  // index-aligned with records
    double selected_dev_f1 = 0.0;
    double selected_val_f1 = 0.0;
    double dev_val_gap = 0.0;  // dev F1 - val F1 for the selected prompt
};

ValidationReport run_validation(const AgentRunner& runner, const Trajectory& trajectory,
                                const SOP& sop, const Corpus& val, bool evaluate_all = false,
                                int parallelism = 1);

}  // namespace promptlab
