#include "promptlab/simlab.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "promptlab/errors.hpp"
#include "promptlab/pipeline.hpp"

namespace promptlab {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t hash_string(const std::string& s, std::uint64_t h) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

double uniform01(std::uint64_t h) {
    return (static_cast<double>(h >> 11) + 0.5) / 9007199254740992.0;  // (0,1)
}

double gaussian(std::uint64_t h) {
    const double u1 = uniform01(splitmix64(h));
    const double u2 = uniform01(splitmix64(h ^ 0xdeadbeefULL));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t double_bits(double x) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, sizeof(bits));
    return bits;
}

std::string format_boundary(double b) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", b);
    return buf;
}

}  // namespace

SimWorld build_world(std::size_t n, double prevalence, std::uint64_t seed, const SimParams& params,
                     const std::string& term) {
    if (!(prevalence > 0.0 && prevalence < 1.0)) {
        throw ConfigError("sim prevalence must lie strictly in (0,1)");
    }
    if (!(params.separation > 0.0)) throw ConfigError("sim separation must be positive");
    if (!(params.step_gain > 0.0)) throw ConfigError("sim step_gain must be positive");
    if (params.noise_scale < 0.0) throw ConfigError("sim noise_scale must be non-negative");
    if (n < 2) throw ConfigError("sim corpus size must be at least 2");

    SimWorld world;
    world.n = n;
    world.prevalence = prevalence;
    world.seed = seed;
    world.params = params;
    world.term = term;
    world.initial_boundary = params.separation / 2.0;

    const TermModel model = builtin_term_model(term);
    const std::size_t half = n / 2;
    world.dev = generate_synthetic_corpus(half, prevalence, model, seed, Split::dev, "sim");
    world.val =
        generate_synthetic_corpus(n - half, prevalence, model, seed ^ 0x5157ULL, Split::val, "sim");

    for (const Corpus* corpus : {&world.dev, &world.val}) {
        for (const Note& note : corpus->notes) {
            const double mean = note.label == 1 ? params.separation : 0.0;
            const std::uint64_t h = splitmix64(hash_string(note.id, splitmix64(seed)));
            world.scores[note.id] = mean + params.noise_scale * gaussian(h);
            world.labels[note.id] = note.label;
        }
    }
    return world;
}

double synthesis_step(const SimWorld& world, Direction direction, std::size_t error_count,
                      std::size_t class_count, double base_boundary) {
    if (class_count < 1) throw ConfigError("synthesis_step: class_count must be >= 1");
    const double fraction =
        static_cast<double>(error_count) / static_cast<double>(class_count);
    std::uint64_t h = splitmix64(world.seed);
    h = splitmix64(h ^ double_bits(base_boundary));
    h = splitmix64(h ^ (direction == Direction::sensitivity ? 0x11ULL : 0x22ULL));
    h = splitmix64(h ^ error_count);
    h = splitmix64(h ^ (class_count << 20));
    // Jitter adds to the step magnitude, so smaller classes always step
    // farther for the same error fraction.
    const double jitter = (world.params.noise_scale / static_cast<double>(class_count)) *
                          uniform01(h);
    const double magnitude = world.params.step_gain * fraction + jitter;
    return direction == Direction::sensitivity ? -magnitude : magnitude;
}

double apply_synthesis_step(const SimWorld& world, Direction direction, std::size_t error_count,
                            std::size_t class_count, double base_boundary) {
    return base_boundary + synthesis_step(world, direction, error_count, class_count, base_boundary);
}

SimBackend::SimBackend(std::shared_ptr<const SimWorld> world) : world_(std::move(world)) {}

double SimBackend::boundary_from_prompt(const std::string& prompt_text, const SimWorld& world) {
    const auto pos = prompt_text.find("boundary=");
    if (pos == std::string::npos) return world.initial_boundary;
    return std::strtod(prompt_text.c_str() + pos + 9, nullptr);
}

ModelResponse SimBackend::complete(const ModelRequest& request) {
    const SimWorld& world = *world_;
    const auto marker = parse_role_marker(request.system_text);
    if (!marker) throw ConfigError("simulated backend: request carries no role marker");

    ModelResponse response;
    response.backend_tag = BackendTag::simulated;

    if (marker->role == "specialist") {
        const auto note_id = parse_note_id(request.user_text);
        if (!note_id || !world.scores.contains(*note_id)) {
            throw ConfigError("simulated specialist: unknown note in request");
        }
        const double boundary = boundary_from_prompt(request.system_text, world);
        response.text = world.scores.at(*note_id) > boundary ? "yes" : "no";
        return response;
    }

    if (marker->role == "improver") {
        if (!marker->direction) throw ConfigError("simulated improver: missing direction");
        const auto note_id = parse_note_id(request.user_text);
        if (!note_id || !world.labels.contains(*note_id)) {
            throw ConfigError("simulated improver: unknown note in request");
        }
        const TermModel model = builtin_term_model(world.term);
        if (*marker->direction == Direction::sensitivity) {
            std::string cue = "an affirmative symptom description";
            for (const auto& phrase : model.positive_phrasings) {
                if (request.user_text.find(phrase) != std::string::npos) {
                    cue = "\"" + phrase + "\"";
                    break;
                }
            }
            response.text = "Missed positive signal in note " + *note_id + ": the note contains " +
                            cue + ", a phrasing the instruction's detection patterns do not cover.";
        } else {
            std::string cue = "no affirmative documentation of the symptom";
            for (const auto& phrase : model.hedged_negatives) {
                if (request.user_text.find(phrase) != std::string::npos) {
                    cue = "the negation \"" + phrase + "\"";
                    break;
                }
            }
            response.text = "Spurious positive on note " + *note_id + ": the note carries " + cue +
                            ", which the instruction lacks an exclusion rule for.";
        }
        return response;
    }

    if (marker->role == "summarizer") {
        if (!marker->direction) throw ConfigError("simulated summarizer: missing direction");
        const double base_boundary = boundary_from_prompt(request.system_text, world);
        const std::size_t error_count = count_critique_lines(request.system_text);
        const std::size_t positives = world.dev.positives();
        const std::size_t class_count =
            *marker->direction == Direction::sensitivity ? positives
                                                         : world.dev.size() - positives;
        const double next_boundary = apply_synthesis_step(world, *marker->direction, error_count,
                                                          class_count, base_boundary);
        std::ostringstream text;
        text << "Identify documented " << world.term << ". Apply the revised "
             << to_string(*marker->direction) << " criteria [boundary=" << format_boundary(next_boundary)
             << "] synthesized from " << error_count << " critiques.";
        response.text = text.str();
        return response;
    }

    if (marker->role == "guiding") {
        const std::uint64_t h =
            splitmix64(hash_string(request.user_text, splitmix64(world.seed ^ 0x6a1dULL)));
        if ((h & 1) == 0) {
            response.text =
                "KIND: switch_target_metric\n"
                "Abandon the current direction and prioritize the other metric next.";
        } else {
            response.text =
                "KIND: rewrite_strategy\n"
                "Discard incremental edits; restate the detection criteria from scratch.";
        }
        return response;
    }

    throw ConfigError("simulated backend: unrecognized role marker \"" + marker->role + "\"");
}

void SimTrace::finalize() {
    oscillation_amplitude = 0.0;
    collapse_iterations.clear();
    if (points.empty()) return;
    double lo = 1.0, hi = 0.0;
    for (const auto& p : points) {
        const double sens = p.val.sensitivity.value_or(0.0);
        lo = std::min(lo, sens);
        hi = std::max(hi, sens);
        if (p.val.sensitivity.has_value() && *p.val.sensitivity == 0.0) {
            collapse_iterations.push_back(p.t);
        }
    }
    oscillation_amplitude = std::max(0.0, hi - lo);
}

namespace {

std::string csv_metric(const std::optional<double>& v) {
    if (!v) return "";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", *v);
    return buf;
}

std::string csv_metric(double v) { return csv_metric(std::optional<double>(v)); }

}  // namespace

void SimTrace::write_csv(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write trace: " + path.string());
    out << "iteration,boundary,dev_sensitivity,dev_specificity,dev_f1,"
           "val_sensitivity,val_specificity,val_f1\n";
    for (const auto& p : points) {
        out << p.t << "," << csv_metric(p.boundary) << "," << csv_metric(p.dev.sensitivity) << ","
            << csv_metric(p.dev.specificity) << "," << csv_metric(p.dev.f1) << ","
            << csv_metric(p.val.sensitivity) << "," << csv_metric(p.val.specificity) << ","
            << csv_metric(p.val.f1) << "\n";
    }
}

InstabilitySummary run_instability_experiment(const std::vector<double>& prevalences,
                                              std::size_t seeds, const SimParams& params,
                                              const InstabilityOptions& options) {
    if (prevalences.empty()) throw ConfigError("instability experiment needs >= 1 prevalence");
    if (seeds < 1) throw ConfigError("instability experiment needs >= 1 seed");

    InstabilitySummary summary;
    for (double prevalence : prevalences) {
        InstabilityRow row;
        row.prevalence = prevalence;
        row.seeds = seeds;
        std::size_t collapse_seeds = 0;

        for (std::size_t s = 0; s < seeds; ++s) {
            auto world = std::make_shared<SimWorld>(
                build_world(options.n, prevalence, options.base_seed + s, params));
            AgentRunner runner(AgentTemplates::builtin(), std::make_shared<SimBackend>(world));

            RunOptions run_options;
            run_options.t_max = options.t_max;
            run_options.guiding_enabled = options.guiding_enabled;
            run_options.degradation_prevention = options.degradation_prevention;
            run_options.selection_strategy = SelectionStrategy::best_dev_f1;
            Thresholds th{options.theta_sensitivity, options.theta_specificity};

            const SOP sop = default_sop(world->term);
            Trajectory trajectory =
                run_development(runner, make_initial_prompt(world->term), sop, world->dev, th,
                                run_options);
            ValidationReport validation =
                run_validation(runner, trajectory, sop, world->val, /*evaluate_all=*/true);

            SimTrace trace;
            trace.selected_index = static_cast<int>(*trajectory.selected_index);
            for (std::size_t i = 0; i < trajectory.records.size(); ++i) {
                SimIterationPoint point;
                point.t = trajectory.records[i].t;
                point.boundary =
                    SimBackend::boundary_from_prompt(trajectory.records[i].prompt.text, *world);
                point.dev = trajectory.records[i].dev_metrics;
                point.val = *validation.per_record[i];
                trace.points.push_back(point);
            }
            trace.finalize();

            row.mean_amplitude += trace.oscillation_amplitude;
            if (!trace.collapse_iterations.empty()) ++collapse_seeds;
            row.mean_selected_val_f1 += validation.selected_val_f1;
            row.mean_final_val_f1 += validation.per_record.back()->f1;
            if (s == 0) summary.sample_traces.push_back(trace);
        }
        row.mean_amplitude /= static_cast<double>(seeds);
        row.collapse_seed_fraction =
            static_cast<double>(collapse_seeds) / static_cast<double>(seeds);
        row.mean_selected_val_f1 /= static_cast<double>(seeds);
        row.mean_final_val_f1 /= static_cast<double>(seeds);
        summary.rows.push_back(row);
    }
    return summary;
}

void write_summary_csv(const InstabilitySummary& summary, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write summary: " + path.string());
    out << "prevalence,seeds,mean_amplitude,collapse_seed_fraction,"
           "mean_selected_val_f1,mean_final_val_f1\n";
    for (const auto& row : summary.rows) {
        out << csv_metric(row.prevalence) << "," << row.seeds << ","
            << csv_metric(row.mean_amplitude) << "," << csv_metric(row.collapse_seed_fraction)
            << "," << csv_metric(row.mean_selected_val_f1) << ","
            << csv_metric(row.mean_final_val_f1) << "\n";
    }
}

}  // namespace promptlab
