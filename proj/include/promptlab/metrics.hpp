#pragma once

#include <cstddef>
#include <optional>
#include <vector>

namespace promptlab {

struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;

    std::size_t total() const { return tp + fp + tn + fn; }
    bool operator==(const ConfusionCounts&) const = default;
};

// Undefined ratios (zero denominator) are empty optionals, never NaN. f1 is
// always a number: 2tp/(2tp+fp+fn), and 0 when that denominator is zero, so
// degenerate prompts can never win selection.
struct Metrics {
    std::optional<double> sensitivity;
    std::optional<double> specificity;
    std::optional<double> precision;
    double f1 = 0.0;
    double accuracy = 0.0;
};

// Entries must be 0/1 and lengths equal; throws ConfigError otherwise.
ConfusionCounts confusion(const std::vector<int>& predictions, const std::vector<int>& labels);

Metrics metrics_from_counts(const ConfusionCounts& c);

// Accuracy masking: zero (or undefined-with-positives) sensitivity while
// accuracy sits within 0.02 of the all-negative classifier's 1 - prevalence.
bool masking_flag(const Metrics& m, double prevalence);

}  // namespace promptlab
