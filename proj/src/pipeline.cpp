#include "promptlab/pipeline.hpp"

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>

#include "promptlab/errors.hpp"

namespace promptlab {

std::string to_string(TargetMetric t) {
    switch (t) {
        case TargetMetric::sensitivity: return "sensitivity";
        case TargetMetric::specificity: return "specificity";
        case TargetMetric::none: return "none";
    }
    return "unknown";
}

TargetMetric target_metric_from_string(const std::string& s) {
    if (s == "sensitivity") return TargetMetric::sensitivity;
    if (s == "specificity") return TargetMetric::specificity;
    if (s == "none") return TargetMetric::none;
    throw LoadError("unknown target metric: " + s);
}

std::string to_string(SelectionStrategy s) {
    return s == SelectionStrategy::best_dev_f1 ? "best_dev_f1" : "final_iteration";
}

SelectionStrategy selection_strategy_from_string(const std::string& s) {
    if (s == "best_dev_f1") return SelectionStrategy::best_dev_f1;
    if (s == "final_iteration") return SelectionStrategy::final_iteration;
    throw ConfigError("unknown selection strategy: " + s);
}

std::string to_string(TerminationReason r) {
    switch (r) {
        case TerminationReason::converged: return "converged";
        case TerminationReason::max_iterations: return "max_iterations";
        case TerminationReason::all_critiques_filtered: return "all_critiques_filtered";
    }
    return "unknown";
}

TerminationReason termination_reason_from_string(const std::string& s) {
    if (s == "converged") return TerminationReason::converged;
    if (s == "max_iterations") return TerminationReason::max_iterations;
    if (s == "all_critiques_filtered") return TerminationReason::all_critiques_filtered;
    throw LoadError("unknown termination reason: " + s);
}

std::pair<std::vector<Prediction>, Metrics> evaluate(const AgentRunner& runner,
                                                     const Prompt& prompt, const SOP& sop,
                                                     const Corpus& corpus, int parallelism) {
    if (corpus.notes.empty()) throw ConfigError("evaluate: empty corpus");
    std::vector<Prediction> predictions(corpus.notes.size());

    if (parallelism <= 1) {
        for (std::size_t i = 0; i < corpus.notes.size(); ++i) {
            predictions[i] = runner.classify(prompt, sop, corpus.notes[i]);
        }
    } else {
        // Completion order is irrelevant; results land at their corpus index.
        std::exception_ptr first_error;
        std::mutex error_mutex;
        std::vector<std::thread> workers;
        const auto worker_count =
            std::min<std::size_t>(static_cast<std::size_t>(parallelism), corpus.notes.size());
        for (std::size_t w = 0; w < worker_count; ++w) {
            workers.emplace_back([&, w]() {
                try {
                    for (std::size_t i = w; i < corpus.notes.size(); i += worker_count) {
                        predictions[i] = runner.classify(prompt, sop, corpus.notes[i]);
                    }
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            });
        }
        for (auto& t : workers) t.join();
        if (first_error) std::rethrow_exception(first_error);
    }

    std::vector<int> yhat(corpus.notes.size());
    std::vector<int> y(corpus.notes.size());
    for (std::size_t i = 0; i < corpus.notes.size(); ++i) {
        yhat[i] = predictions[i].label;
        y[i] = corpus.notes[i].label;
    }
    return {std::move(predictions), metrics_from_counts(confusion(yhat, y))};
}

ConvergenceStatus check_convergence(const Metrics& m, const Thresholds& th) {
    const bool sens_ok = m.sensitivity.has_value() && *m.sensitivity >= th.theta_sensitivity;
    const bool spec_ok = m.specificity.has_value() && *m.specificity >= th.theta_specificity;
    if (sens_ok && spec_ok) return ConvergenceStatus::converged;
    if (!sens_ok) return ConvergenceStatus::improve_sensitivity;
    return ConvergenceStatus::improve_specificity;
}

namespace {

struct ErrorSets {
    std::vector<std::size_t> false_positives;  // note indices, corpus order
    std::vector<std::size_t> false_negatives;
};

ErrorSets collect_errors(const std::vector<Prediction>& predictions, const Corpus& corpus) {
    ErrorSets errors;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (predictions[i].label == 1 && corpus.notes[i].label == 0) {
            errors.false_positives.push_back(i);
        } else if (predictions[i].label == 0 && corpus.notes[i].label == 1) {
            errors.false_negatives.push_back(i);
        }
    }
    return errors;
}

TargetMetric flip(TargetMetric t) {
    return t == TargetMetric::sensitivity ? TargetMetric::specificity : TargetMetric::sensitivity;
}

}  // namespace

Trajectory run_development(const AgentRunner& runner, const Prompt& p0, const SOP& sop,
                           const Corpus& dev, const Thresholds& th, const RunOptions& options) {
    if (options.t_max < 1) throw ConfigError("t_max must be >= 1");
    if (!(th.theta_sensitivity > 0.0 && th.theta_sensitivity <= 1.0 &&
          th.theta_specificity > 0.0 && th.theta_specificity <= 1.0)) {
        throw ConfigError("thresholds must lie in (0,1]");
    }

    Trajectory trajectory;
    trajectory.selection_strategy = options.selection_strategy;
    trajectory.thresholds = th;
    trajectory.t_max = options.t_max;

    Prompt current = p0;
    std::vector<double> f1_history;
    ErrorSets prev_errors;

    for (int t = 0;; ++t) {
        auto [predictions, dev_metrics] = evaluate(runner, current, sop, dev, options.parallelism);

        IterationRecord rec;
        rec.t = t;
        rec.prompt = current;
        rec.dev_metrics = dev_metrics;
        rec.reverted = current.origin == PromptOrigin::revert_synthesis;
        rec.predictions = predictions;

        const ConvergenceStatus status = check_convergence(dev_metrics, th);
        if (status == ConvergenceStatus::converged) {
            rec.target_metric = TargetMetric::none;
            trajectory.records.push_back(std::move(rec));
            trajectory.termination_reason = TerminationReason::converged;
            break;
        }
        if (t == options.t_max) {
            rec.target_metric = TargetMetric::none;
            trajectory.records.push_back(std::move(rec));
            trajectory.termination_reason = TerminationReason::max_iterations;
            break;
        }

        TargetMetric target = status == ConvergenceStatus::improve_sensitivity
                                  ? TargetMetric::sensitivity
                                  : TargetMetric::specificity;

        const bool have_previous = !f1_history.empty();
        double revert_baseline = 0.0;
        if (have_previous) {
            revert_baseline = options.compare_best_so_far
                                  ? *std::max_element(f1_history.begin(), f1_history.end())
                                  : f1_history.back();
        }
        const bool revert = options.degradation_prevention && have_previous &&
                            dev_metrics.f1 < revert_baseline;

        // Guiding triggers on non-improvement (ties count as failure). When a
        // revert also fires, the directive attaches to the revert synthesis.
        std::optional<GuidanceDirective> directive;
        if (options.guiding_enabled && have_previous && dev_metrics.f1 <= f1_history.back()) {
            std::vector<double> history = f1_history;
            history.push_back(dev_metrics.f1);
            directive = runner.guide(history, t + 1);
            rec.guidance = directive;
            if (directive->kind == DirectiveKind::switch_target_metric) target = flip(target);
        }
        rec.target_metric = target;

        const ErrorSets current_errors = collect_errors(predictions, dev);
        const Prompt& base = revert ? trajectory.records.back().prompt : current;
        const ErrorSets& source_errors = revert ? prev_errors : current_errors;
        const std::vector<std::size_t>& targeted = target == TargetMetric::sensitivity
                                                       ? source_errors.false_negatives
                                                       : source_errors.false_positives;
        const ErrorKind kind = target == TargetMetric::sensitivity ? ErrorKind::false_negative
                                                                   : ErrorKind::false_positive;

        std::vector<Critique> critiques;
        critiques.reserve(targeted.size());
        for (std::size_t idx : targeted) {
            critiques.push_back(runner.critique(base, sop, dev.notes[idx], kind));
        }
        rec.critique_count = critiques.size();
        rec.critiques = critiques;

        std::vector<Critique> actionable;
        for (const auto& c : critiques) {
            if (c.actionable) actionable.push_back(c);
        }
        rec.filtered_count = critiques.size() - actionable.size();

        if (actionable.empty()) {
            trajectory.records.push_back(std::move(rec));
            trajectory.termination_reason = TerminationReason::all_critiques_filtered;
            break;
        }

        const Direction direction = target == TargetMetric::sensitivity ? Direction::sensitivity
                                                                        : Direction::specificity;
        std::optional<Prompt> failed_example;
        if (revert) failed_example = current;
        Prompt next =
            runner.synthesize(actionable, base, sop, direction, t + 1, failed_example, directive);

        trajectory.records.push_back(std::move(rec));
        f1_history.push_back(dev_metrics.f1);
        prev_errors = current_errors;
        current = std::move(next);
    }

    trajectory.selected_index = select(trajectory);
    return trajectory;
}

std::size_t select(const Trajectory& trajectory) {
    if (trajectory.records.empty()) throw ConfigError("select: empty trajectory");
    if (trajectory.selection_strategy == SelectionStrategy::final_iteration) {
        return trajectory.records.size() - 1;
    }
    std::size_t best = 0;
    double best_f1 = trajectory.records[0].dev_metrics.f1;
    for (std::size_t i = 1; i < trajectory.records.size(); ++i) {
        const double f1 = trajectory.records[i].dev_metrics.f1;
        if (f1 > best_f1) {  // strict: ties keep the earliest iteration
            best = i;
            best_f1 = f1;
        }
    }
    return best;
}

ValidationReport run_validation(const AgentRunner& runner, const Trajectory& trajectory,
                                const SOP& sop, const Corpus& val, bool evaluate_all,
                                int parallelism) {
    if (!trajectory.selected_index) throw ConfigError("run_validation: no selected index");
    const std::size_t selected = *trajectory.selected_index;

    ValidationReport report;
    report.per_record.assign(trajectory.records.size(), std::nullopt);
    for (std::size_t i = 0; i < trajectory.records.size(); ++i) {
        if (!evaluate_all && i != selected) continue;
        auto [predictions, metrics] =
            evaluate(runner, trajectory.records[i].prompt, sop, val, parallelism);
        report.per_record[i] = metrics;
    }
    report.selected_dev_f1 = trajectory.records[selected].dev_metrics.f1;
    report.selected_val_f1 = report.per_record[selected]->f1;
    report.dev_val_gap = report.selected_dev_f1 - report.selected_val_f1;
    return report;
}

}  // namespace promptlab
