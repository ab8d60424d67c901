#include "promptlab/metrics.hpp"

#include "promptlab/errors.hpp"

namespace promptlab {

ConfusionCounts confusion(const std::vector<int>& predictions, const std::vector<int>& labels) {
    if (predictions.size() != labels.size()) {
        throw ConfigError("confusion: prediction/label length mismatch");
    }
    if (predictions.empty()) throw ConfigError("confusion: empty inputs");
    ConfusionCounts c;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const int p = predictions[i];
        const int y = labels[i];
        if ((p != 0 && p != 1) || (y != 0 && y != 1)) {
            throw ConfigError("confusion: entries must be 0 or 1");
        }
        if (y == 1) {
            (p == 1 ? c.tp : c.fn)++;
        } else {
            (p == 1 ? c.fp : c.tn)++;
        }
    }
    return c;
}

Metrics metrics_from_counts(const ConfusionCounts& c) {
    if (c.total() == 0) throw ConfigError("metrics: zero instances");
    Metrics m;
    if (c.tp + c.fn > 0) {
        m.sensitivity = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    }
    if (c.tn + c.fp > 0) {
        m.specificity = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
    }
    if (c.tp + c.fp > 0) {
        m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    }
    const std::size_t f1_denom = 2 * c.tp + c.fp + c.fn;
    m.f1 = f1_denom == 0 ? 0.0 : 2.0 * static_cast<double>(c.tp) / static_cast<double>(f1_denom);
    m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
    return m;
}

bool masking_flag(const Metrics& m, double prevalence) {
    const bool zero_sensitivity =
        m.sensitivity.has_value() ? *m.sensitivity == 0.0 : prevalence > 0.0;
    return zero_sensitivity && m.accuracy >= 1.0 - prevalence - 0.02;
}

}  // namespace promptlab
