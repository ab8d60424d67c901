#include "promptlab/reporting.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "promptlab/errors.hpp"

namespace promptlab {

namespace {

std::string fmt(double v, const char* spec = "%.6f") {
    char buf[32];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

const Metrics& require_val(const ConditionTrajectory& input, std::size_t i, const char* where) {
    if (i >= input.val_metrics.size() || !input.val_metrics[i]) {
        throw LoadError(std::string(where) + ": missing validation metrics for iteration " +
                        std::to_string(i) + " of condition \"" + input.condition + "\"");
    }
    return *input.val_metrics[i];
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write report file: " + path.string());
    out << text;
}

}  // namespace

int percent_delta(double from, double to) {
    const double pct = (to - from) / from * 100.0;
    // Half away from zero, matching the table formatting convention.
    return static_cast<int>(pct >= 0.0 ? std::floor(pct + 0.5) : std::ceil(pct - 0.5));
}

std::vector<DegradationRow> degradation_table(const std::vector<ConditionTrajectory>& inputs) {
    std::vector<DegradationRow> rows;
    for (const auto& input : inputs) {
        if (input.val_metrics.size() < 2) {
            throw LoadError("degradation_table: condition \"" + input.condition +
                            "\" has no refinement iterations with validation metrics");
        }
        DegradationRow row;
        row.condition = input.condition;
        row.prevalence = input.prevalence;
        row.first_f1 = require_val(input, 1, "degradation_table").f1;
        row.final_f1 = require_val(input, input.val_metrics.size() - 1, "degradation_table").f1;
        if (row.first_f1 != 0.0) row.delta_pct = percent_delta(row.first_f1, row.final_f1);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string degradation_csv(const std::vector<DegradationRow>& rows) {
    std::ostringstream out;
    out << "condition,prevalence,first_iter_f1,final_iter_f1,delta_pct\n";
    for (const auto& r : rows) {
        out << r.condition << "," << fmt(r.prevalence) << "," << fmt(r.first_f1) << ","
            << fmt(r.final_f1) << ",";
        if (r.delta_pct) {
            out << (*r.delta_pct > 0 ? "+" : "") << *r.delta_pct << "%";
        } else {
            out << "n/a";
        }
        out << "\n";
    }
    return out.str();
}

std::vector<ComparisonRow> comparison_table(const std::vector<ComparisonEntry>& entries) {
    std::vector<ComparisonRow> rows;
    for (const auto& e : entries) {
        ComparisonRow row;
        static_cast<ComparisonEntry&>(row) = e;
        if (e.lexicon_f1 != 0.0) row.delta_pct = percent_delta(e.lexicon_f1, e.optimized_f1);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
    std::ostringstream out;
    out << "condition,prevalence,optimized_f1,lexicon_f1,delta_pct\n";
    for (const auto& r : rows) {
        out << r.condition << "," << fmt(r.prevalence) << "," << fmt(r.optimized_f1) << ","
            << fmt(r.lexicon_f1) << ",";
        if (r.delta_pct) {
            out << (*r.delta_pct > 0 ? "+" : "") << *r.delta_pct << "%";
        } else {
            out << "n/a";
        }
        out << "\n";
    }
    return out.str();
}

OscillationReport oscillation_report(const ConditionTrajectory& input) {
    std::size_t evaluated = 0;
    for (const auto& m : input.val_metrics) {
        if (m) ++evaluated;
    }
    if (evaluated < 2) {
        throw LoadError("oscillation_report: fewer than 2 validation-evaluated iterations for \"" +
                        input.condition + "\"");
    }
    OscillationReport report;
    double lo = 1.0, hi = 0.0;
    for (std::size_t t = 0; t < input.val_metrics.size(); ++t) {
        if (!input.val_metrics[t]) continue;
        const Metrics& m = *input.val_metrics[t];
        const double sens = m.sensitivity.value_or(0.0);
        lo = std::min(lo, sens);
        hi = std::max(hi, sens);
        if (m.sensitivity.has_value() && *m.sensitivity == 0.0) {
            report.collapse_iterations.push_back(static_cast<int>(t));
        }
        if (masking_flag(m, input.prevalence)) {
            report.masking_iterations.push_back(static_cast<int>(t));
        }
    }
    report.amplitude = std::max(0.0, hi - lo);
    return report;
}

nlohmann::ordered_json oscillation_json(const OscillationReport& report) {
    return {{"amplitude", report.amplitude},
            {"collapse_iterations", report.collapse_iterations},
            {"masking_iterations", report.masking_iterations}};
}

SelectedVsOptimalRow selected_vs_optimal(const ConditionTrajectory& input) {
    SelectedVsOptimalRow row;
    row.condition = input.condition;
    row.selected_index = input.selected_index;
    row.selected_val_f1 = require_val(input, input.selected_index, "selected_vs_optimal").f1;
    row.optimal_index = 0;
    row.optimal_val_f1 = require_val(input, 0, "selected_vs_optimal").f1;
    for (std::size_t t = 1; t < input.val_metrics.size(); ++t) {
        const double f1 = require_val(input, t, "selected_vs_optimal").f1;
        if (f1 > row.optimal_val_f1) {
            row.optimal_index = t;
            row.optimal_val_f1 = f1;
        }
    }
    return row;
}

std::string selected_vs_optimal_csv(const std::vector<SelectedVsOptimalRow>& rows) {
    std::ostringstream out;
    out << "condition,selected_iteration,selected_val_f1,optimal_iteration,optimal_val_f1\n";
    for (const auto& r : rows) {
        out << r.condition << "," << r.selected_index << "," << fmt(r.selected_val_f1) << ","
            << r.optimal_index << "," << fmt(r.optimal_val_f1) << "\n";
    }
    return out.str();
}

std::string figure_csv(const ConditionTrajectory& input) {
    std::ostringstream out;
    out << "iteration,val_sensitivity\n";
    for (std::size_t t = 0; t < input.val_metrics.size(); ++t) {
        if (!input.val_metrics[t]) continue;
        out << t << "," << fmt(input.val_metrics[t]->sensitivity.value_or(0.0)) << "\n";
    }
    return out.str();
}

void write_report_dir(const std::filesystem::path& dir, const ConditionTrajectory& input) {
    std::filesystem::create_directories(dir);
    write_text_file(dir / "degradation.csv", degradation_csv(degradation_table({input})));
    write_text_file(dir / "oscillation.json",
                    oscillation_json(oscillation_report(input)).dump(2) + "\n");
    write_text_file(dir / "selected_vs_optimal.csv",
                    selected_vs_optimal_csv({selected_vs_optimal(input)}));
    write_text_file(dir / "figure2a.csv", figure_csv(input));
}

}  // namespace promptlab
