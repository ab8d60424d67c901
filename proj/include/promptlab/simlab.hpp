#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "promptlab/agents.hpp"
#include "promptlab/dataset.hpp"
#include "promptlab/gateway.hpp"
#include "promptlab/metrics.hpp"

namespace promptlab {

struct SimParams {
    // Calibrated via scripts/calibrate.sh so the default p=0.03 sweep shows
    // majority-of-seeds sensitivity collapse and prevalence-ordered
    // oscillation amplitude.
    double separation = 1.45;
    double step_gain = 10.5;
    double noise_scale = 0.72;
};

// 1-D latent-score world: negatives score around 0, positives around
// `separation`, and each synthesis moves the decision boundary by a step whose
// size scales with the targeted class's error fraction and shrinks in noise
// as the class grows. Small classes take large, noisy steps.
struct SimWorld {
    std::size_t n = 400;  // total across both splits
    double prevalence = 0.03;
    std::uint64_t seed = 1;
    SimParams params;
    double initial_boundary = 0.0;  // midpoint between the class means

    std::string term = "brain fog";
    Corpus dev;
    Corpus val;
    std::map<std::string, double> scores;  // note id -> latent score
    std::map<std::string, int> labels;     // note id -> ground truth
};

SimWorld build_world(std::size_t n, double prevalence, std::uint64_t seed,
                     const SimParams& params, const std::string& term = "brain fog");

// Boundary delta for one synthesis. Deterministic in (world seed, base
// boundary, direction, counts). Sensitivity steps move the boundary down,
// specificity steps up; magnitude = step_gain * error_count / class_count
// plus jitter of magnitude noise_scale / class_count.
double synthesis_step(const SimWorld& world, Direction direction, std::size_t error_count,
                      std::size_t class_count, double base_boundary);

double apply_synthesis_step(const SimWorld& world, Direction direction, std::size_t error_count,
                            std::size_t class_count, double base_boundary);

// Deterministic stand-in for all agent roles. Specialist thresholds the
// note's latent score against the boundary encoded in the prompt text;
// summarizers answer with a new prompt text carrying the stepped boundary.
class SimBackend : public Backend {
public:
    explicit SimBackend(std::shared_ptr<const SimWorld> world);
    ModelResponse complete(const ModelRequest& request) override;

    static double boundary_from_prompt(const std::string& prompt_text, const SimWorld& world);

private:
    std::shared_ptr<const SimWorld> world_;
};

struct SimIterationPoint {
    int t = 0;
    double boundary = 0.0;
    Metrics dev;
    Metrics val;
};

struct SimTrace {
    std::vector<SimIterationPoint> points;
    int selected_index = 0;
    double oscillation_amplitude = 0.0;  // max - min of validation sensitivity
    std::vector<int> collapse_iterations;  // val sensitivity == 0 with positives present

    void finalize();  // fills the derived fields from points
    void write_csv(const std::filesystem::path& path) const;
};

struct InstabilityRow {
    double prevalence = 0.0;
    std::size_t seeds = 0;
    double mean_amplitude = 0.0;
    double collapse_seed_fraction = 0.0;  // seeds with >= 1 collapse iteration
    double mean_selected_val_f1 = 0.0;
    double mean_final_val_f1 = 0.0;
};

struct InstabilitySummary {
    std::vector<InstabilityRow> rows;
    std::vector<SimTrace> sample_traces;  // first seed per prevalence
};

struct InstabilityOptions {
    std::size_t n = 400;
    int t_max = 7;
    bool degradation_prevention = true;
    bool guiding_enabled = false;
    double theta_sensitivity = 0.9;
    double theta_specificity = 0.9;
    std::uint64_t base_seed = 1;
};

// Runs the full development+validation pipeline against the simulated backend
// for every (prevalence, seed) pair and aggregates the trace statistics.
InstabilitySummary run_instability_experiment(const std::vector<double>& prevalences,
                                              std::size_t seeds, const SimParams& params,
                                              const InstabilityOptions& options = {});

void write_summary_csv(const InstabilitySummary& summary, const std::filesystem::path& path);

}  // namespace promptlab
