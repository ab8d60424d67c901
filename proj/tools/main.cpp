#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

#include <CLI11.hpp>

#include "promptlab/artifacts.hpp"
#include "promptlab/baseline.hpp"
#include "promptlab/config.hpp"
#include "promptlab/errors.hpp"
#include "promptlab/pipeline.hpp"
#include "promptlab/reporting.hpp"
#include "promptlab/simlab.hpp"

namespace promptlab {
namespace {

namespace fs = std::filesystem;

std::string fmt_metric(const std::optional<double>& v) {
    if (!v) return "undefined";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", *v);
    return buf;
}

std::string fmt_metric(double v) { return fmt_metric(std::optional<double>(v)); }

void print_metrics(const std::string& label, const Metrics& m) {
    std::cout << label << ": sensitivity=" << fmt_metric(m.sensitivity)
              << " specificity=" << fmt_metric(m.specificity) << " f1=" << fmt_metric(m.f1)
              << " accuracy=" << fmt_metric(m.accuracy) << "\n";
}

Corpus resolve_corpus(const DatasetSource& source, const std::string& term, Split split,
                      const std::string& key) {
    if (!source.configured()) {
        throw ConfigError("config key \"" + key + "\" is required but not set");
    }
    if (source.path) return load_corpus(*source.path, split);
    const auto& s = *source.synthetic;
    return generate_synthetic_corpus(s.n, s.prevalence, builtin_term_model(term), s.seed, split,
                                     "synthetic");
}

struct RunSetup {
    std::shared_ptr<Backend> backend;
    Corpus dev;
    Corpus val;
};

RunSetup setup_run(const AppConfig& config) {
    RunSetup setup;
    if (config.mode == RunMode::sim) {
        // In sim mode the world supplies both corpora; dataset keys are ignored.
        auto world = std::make_shared<SimWorld>(build_world(
            config.sim_n, config.sim_prevalence, config.seed, config.sim_params, config.term));
        setup.dev = world->dev;
        setup.val = world->val;
        setup.backend = std::make_shared<SimBackend>(world);
    } else {
        setup.dev = resolve_corpus(config.dev, config.term, Split::dev, "datasets.dev");
        setup.val = resolve_corpus(config.val, config.term, Split::val, "datasets.val");
        setup.backend = make_live_backend(config.backend);
    }
    return setup;
}

AgentRunner make_runner(const AppConfig& config, std::shared_ptr<Backend> backend) {
    AgentTemplates templates = config.templates_dir ? AgentTemplates::load(*config.templates_dir)
                                                    : AgentTemplates::builtin();
    return AgentRunner(std::move(templates), std::move(backend));
}

SOP resolve_sop(const AppConfig& config) {
    return config.sop_path ? load_sop(*config.sop_path) : default_sop(config.term);
}

int cmd_optimize(const AppConfig& config, bool resume) {
    if (fs::exists(config.out_dir / "trajectory.json") && !resume) {
        throw ConfigError("output directory already holds a run: " + config.out_dir.string() +
                          " (pass --resume to continue via the call cache)");
    }
    RunSetup setup = setup_run(config);
    AgentRunner runner = make_runner(config, setup.backend);
    const SOP sop = resolve_sop(config);

    RunOptions options;
    options.t_max = config.t_max;
    options.guiding_enabled = config.guiding_enabled;
    options.selection_strategy = config.selection_strategy;
    options.degradation_prevention = config.degradation_prevention;
    options.parallelism = config.parallelism;

    Trajectory trajectory = run_development(runner, make_initial_prompt(config.term), sop,
                                            setup.dev, config.thresholds, options);
    ValidationReport validation =
        run_validation(runner, trajectory, sop, setup.val, /*evaluate_all=*/true,
                       config.parallelism);

    nlohmann::ordered_json run_config = config_to_json(config);
    run_config["dev_prevalence"] = setup.dev.prevalence();
    run_config["val_prevalence"] = setup.val.prevalence();
    write_run_artifacts(config.out_dir, run_config, trajectory, validation);

    const std::size_t selected = *trajectory.selected_index;
    std::cout << "run complete: " << trajectory.records.size() << " iterations, "
              << to_string(trajectory.termination_reason) << "\n";
    std::cout << "selected iteration " << selected << " ("
              << trajectory.records[selected].prompt.id << ")\n";
    print_metrics("dev ", trajectory.records[selected].dev_metrics);
    print_metrics("val ", *validation.per_record[selected]);
    std::cout << "dev-val F1 gap: " << fmt_metric(validation.dev_val_gap) << "\n";
    std::cout << "artifacts: " << config.out_dir.string() << "\n";
    return 0;
}

int cmd_validate(const AppConfig& config, const fs::path& run_dir, bool all) {
    RunArtifacts artifacts = load_run_artifacts(run_dir);
    RunSetup setup = setup_run(config);
    AgentRunner runner = make_runner(config, setup.backend);
    const SOP sop = resolve_sop(config);

    ValidationReport validation = run_validation(runner, artifacts.trajectory, sop, setup.val, all,
                                                 config.parallelism);
    std::ofstream out(run_dir / "trajectory.json");
    if (!out) throw LoadError("cannot rewrite " + (run_dir / "trajectory.json").string());
    out << trajectory_to_json(artifacts.trajectory, validation).dump(2) << "\n";

    print_metrics("val ", *validation.per_record[*artifacts.trajectory.selected_index]);
    std::cout << "dev-val F1 gap: " << fmt_metric(validation.dev_val_gap) << "\n";
    return 0;
}

int cmd_baseline(const AppConfig& config) {
    if (!config.lexicon_path) {
        throw ConfigError("config key \"lexicon_path\" is required for the baseline command");
    }
    const Lexicon lexicon = load_lexicon(*config.lexicon_path);
    Corpus val;
    if (config.mode == RunMode::sim) {
        val = setup_run(config).val;
    } else {
        val = resolve_corpus(config.val, config.term, Split::val, "datasets.val");
    }
    const Metrics metrics = lexicon_evaluate(lexicon, val);
    print_metrics("lexicon ", metrics);

    fs::create_directories(config.out_dir);
    std::ofstream out(config.out_dir / "lexicon_metrics.json");
    out << metrics_to_json(metrics).dump(2) << "\n";

    if (config.compare_run) {
        RunArtifacts artifacts = load_run_artifacts(*config.compare_run);
        if (!artifacts.validation) {
            throw LoadError("run " + config.compare_run->string() +
                            " has no validation metrics; run validate first");
        }
        ComparisonEntry entry;
        entry.condition = config.term;
        entry.prevalence = val.prevalence();
        entry.optimized_f1 = artifacts.validation->selected_val_f1;
        entry.lexicon_f1 = metrics.f1;
        const auto rows = comparison_table({entry});
        const std::string csv = comparison_csv(rows);
        std::ofstream comparison(config.out_dir / "comparison.csv");
        comparison << csv;
        std::cout << csv;
    }
    std::cout << "baseline outputs: " << config.out_dir.string() << "\n";
    return 0;
}

int cmd_simulate(const AppConfig& config) {
    InstabilityOptions options;
    options.n = config.sim_n;
    options.t_max = config.t_max;
    options.degradation_prevention = config.degradation_prevention;
    options.guiding_enabled = config.guiding_enabled;
    options.theta_sensitivity = config.thresholds.theta_sensitivity;
    options.theta_specificity = config.thresholds.theta_specificity;
    options.base_seed = config.seed;

    const InstabilitySummary summary = run_instability_experiment(
        config.sweep_prevalences, config.sweep_seeds, config.sim_params, options);

    fs::create_directories(config.out_dir);
    write_summary_csv(summary, config.out_dir / "summary.csv");
    for (std::size_t i = 0; i < summary.sample_traces.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof(name), "trace_p%.3f_seed%llu.csv",
                      config.sweep_prevalences[i],
                      static_cast<unsigned long long>(config.seed));
        summary.sample_traces[i].write_csv(config.out_dir / name);
    }

    std::cout << "prevalence  amplitude  collapse_seeds  selected_f1  final_f1\n";
    for (const auto& row : summary.rows) {
        std::printf("%9.3f  %9.4f  %13.0f%%  %11.4f  %8.4f\n", row.prevalence,
                    row.mean_amplitude, row.collapse_seed_fraction * 100.0,
                    row.mean_selected_val_f1, row.mean_final_val_f1);
    }
    std::cout << "outputs: " << config.out_dir.string() << "\n";
    return 0;
}

int cmd_report(const fs::path& run_dir) {
    RunArtifacts artifacts = load_run_artifacts(run_dir);
    if (!artifacts.validation) {
        throw LoadError("run " + run_dir.string() +
                        " has no validation metrics in trajectory.json; run validate first");
    }
    ConditionTrajectory input;
    input.condition = artifacts.run_config.value("term", std::string("unknown"));
    input.prevalence = artifacts.run_config.value("val_prevalence", 0.0);
    for (const auto& rec : artifacts.trajectory.records) input.dev_metrics.push_back(rec.dev_metrics);
    input.val_metrics = artifacts.validation->per_record;
    if (!artifacts.trajectory.selected_index) {
        throw LoadError("run " + run_dir.string() + " has no selected iteration");
    }
    input.selected_index = *artifacts.trajectory.selected_index;

    write_report_dir(run_dir / "report", input);
    std::cout << "report written: " << (run_dir / "report").string() << "\n";
    return 0;
}

int run(int argc, char** argv) {
    CLI::App app{"iterative prompt optimization engine"};
    app.require_subcommand(1);

    std::string config_path;
    std::string run_dir;
    std::string out_dir_override;
    int t_max_override = -1;
    std::optional<std::uint64_t> seed_override;
    bool resume = false;
    bool validate_all = false;

    auto add_config_opt = [&](CLI::App* cmd, bool required = true) {
        auto* opt = cmd->add_option("-c,--config", config_path, "config file (JSON)");
        if (required) opt->required();
        cmd->add_option("--out", out_dir_override, "override out_dir");
        cmd->add_option("--t-max", t_max_override, "override t_max");
        cmd->add_option("--seed", seed_override, "override seed");
    };

    auto* optimize = app.add_subcommand("optimize", "run development + validation");
    add_config_opt(optimize);
    optimize->add_flag("--resume", resume, "continue an interrupted run via the call cache");

    auto* validate = app.add_subcommand("validate", "re-run validation for an existing run");
    add_config_opt(validate);
    validate->add_option("--run", run_dir, "run artifact directory")->required();
    validate->add_flag("--all", validate_all, "evaluate every iteration, not just the selected");

    auto* baseline = app.add_subcommand("baseline", "evaluate a lexicon baseline");
    add_config_opt(baseline);

    auto* simulate = app.add_subcommand("simulate", "run the instability seed sweep");
    add_config_opt(simulate);

    auto* report = app.add_subcommand("report", "regenerate reports from run artifacts");
    report->add_option("--run", run_dir, "run artifact directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    auto load = [&]() {
        AppConfig config = load_config(config_path);
        if (!out_dir_override.empty()) config.out_dir = out_dir_override;
        if (t_max_override > 0) config.t_max = t_max_override;
        if (seed_override) config.seed = *seed_override;
        return config;
    };

    if (optimize->parsed()) return cmd_optimize(load(), resume);
    if (validate->parsed()) return cmd_validate(load(), run_dir, validate_all);
    if (baseline->parsed()) return cmd_baseline(load());
    if (simulate->parsed()) return cmd_simulate(load());
    if (report->parsed()) return cmd_report(run_dir);
    return 2;
}

}  // namespace
}  // namespace promptlab

int main(int argc, char** argv) {
    try {
        return promptlab::run(argc, argv);
    } catch (const promptlab::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const promptlab::TransportError& e) {
        std::cerr << "transport error: " << e.what() << "\n";
        return 3;
    } catch (const promptlab::ResponseParseError& e) {
        std::cerr << "backend response error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
