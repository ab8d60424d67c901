#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "promptlab/errors.hpp"
#include "promptlab/pipeline.hpp"
#include "promptlab/simlab.hpp"

using namespace promptlab;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

fs::path temp_dir() {
    const auto dir = fs::temp_directory_path() / "promptlab_simlab_tests";
    fs::create_directories(dir);
    return dir;
}

AgentRunner sim_runner(std::shared_ptr<const SimWorld> world) {
    return AgentRunner(AgentTemplates::builtin(), std::make_shared<SimBackend>(world));
}

}  // namespace

TEST_CASE("build_world: deterministic, exact class sizes, boundary at the midpoint") {
    const SimParams params;
    const SimWorld a = build_world(400, 0.03, 5, params);
    const SimWorld b = build_world(400, 0.03, 5, params);
    CHECK(a.dev.size() == 200);
    CHECK(a.val.size() == 200);
    CHECK(a.dev.positives() == 6);
    CHECK(a.val.positives() == 6);
    CHECK(a.initial_boundary == params.separation / 2.0);
    CHECK(a.scores == b.scores);
    CHECK(a.labels == b.labels);
    CHECK(a.dev.notes[0].id != a.val.notes[0].id);

    const SimWorld c = build_world(400, 0.03, 6, params);
    CHECK(a.scores != c.scores);

    CHECK_THROWS_AS(build_world(400, 0.0, 1, params), ConfigError);
    CHECK_THROWS_AS(build_world(1, 0.5, 1, params), ConfigError);
    SimParams bad = params;
    bad.step_gain = 0.0;
    CHECK_THROWS_AS(build_world(400, 0.03, 1, bad), ConfigError);
}

TEST_CASE("latent scores sit around the class means") {
    SimParams params;
    params.noise_scale = 0.3;
    const SimWorld world = build_world(400, 0.23, 3, params);
    double pos_sum = 0.0, neg_sum = 0.0;
    std::size_t pos_n = 0, neg_n = 0;
    for (const auto& [id, score] : world.scores) {
        if (world.labels.at(id) == 1) {
            pos_sum += score;
            pos_n++;
        } else {
            neg_sum += score;
            neg_n++;
        }
    }
    CHECK(pos_n == 92);
    CHECK(std::abs(pos_sum / pos_n - params.separation) < 0.2);
    CHECK(std::abs(neg_sum / neg_n) < 0.2);
}

TEST_CASE("with zero noise the initial prompt is already perfect") {
    SimParams params;
    params.noise_scale = 0.0;
    auto world = std::make_shared<const SimWorld>(build_world(200, 0.1, 1, params));
    auto runner = sim_runner(world);
    const SOP sop = default_sop(world->term);
    auto [predictions, metrics] =
        evaluate(runner, make_initial_prompt(world->term), sop, world->dev);
    CHECK(*metrics.sensitivity == 1.0);
    CHECK(*metrics.specificity == 1.0);
    const Trajectory traj = run_development(runner, make_initial_prompt(world->term), sop,
                                            world->dev, Thresholds{}, {});
    CHECK(traj.records.size() == 1);
    CHECK(traj.termination_reason == TerminationReason::converged);
}

TEST_CASE("synthesis_step: sign, bounds, and small-class amplification") {
    const SimWorld world = build_world(400, 0.03, 7, SimParams{});
    const double gain = world.params.step_gain;
    const double noise = world.params.noise_scale;

    // Sensitivity pulls the boundary down, specificity pushes it up.
    CHECK(synthesis_step(world, Direction::sensitivity, 3, 6, 1.0) < 0.0);
    CHECK(synthesis_step(world, Direction::specificity, 10, 194, 1.0) > 0.0);

    // |step| is error-fraction-driven with bounded jitter.
    for (const double boundary : {-0.5, 0.2, 1.0, 1.7}) {
        for (const std::size_t errors : {std::size_t{0}, std::size_t{1}, std::size_t{3},
                                         std::size_t{6}}) {
            const double step =
                std::abs(synthesis_step(world, Direction::sensitivity, errors, 6, boundary));
            const double fraction = double(errors) / 6.0;
            CHECK(step >= gain * fraction);
            CHECK(step < gain * fraction + noise / 6.0);
        }
    }

    // Deterministic for identical inputs.
    CHECK(synthesis_step(world, Direction::sensitivity, 2, 6, 0.4) ==
          synthesis_step(world, Direction::sensitivity, 2, 6, 0.4));
    // A single error moves a 6-note class farther than a 194-note class.
    CHECK(std::abs(synthesis_step(world, Direction::sensitivity, 1, 6, 0.4)) >
          std::abs(synthesis_step(world, Direction::sensitivity, 1, 194, 0.4)));

    SimParams quiet;
    quiet.noise_scale = 0.0;
    const SimWorld silent = build_world(400, 0.03, 7, quiet);
    CHECK(synthesis_step(silent, Direction::specificity, 0, 194, 1.0) == 0.0);

    CHECK_THROWS_AS(synthesis_step(world, Direction::sensitivity, 1, 0, 1.0), ConfigError);
}

TEST_CASE("boundary travels inside the prompt text") {
    const SimWorld world = build_world(400, 0.03, 2, SimParams{});
    CHECK(SimBackend::boundary_from_prompt("brain fog", world) == world.initial_boundary);
    CHECK(SimBackend::boundary_from_prompt("criteria [boundary=0.25] from 3 critiques", world) ==
          0.25);
    CHECK(SimBackend::boundary_from_prompt("[boundary=-1.5]", world) == -1.5);
}

TEST_CASE("simulated specialist thresholds the latent score") {
    auto world = std::make_shared<const SimWorld>(build_world(400, 0.12, 8, SimParams{}));
    auto runner = sim_runner(world);
    const SOP sop = default_sop(world->term);
    for (const double boundary : {0.2, 1.0, 1.6}) {
        Prompt prompt;
        prompt.id = "Px";
        prompt.text = "Identify documented brain fog. [boundary=" + std::to_string(boundary) + "]";
        for (const Note& note : world->dev.notes) {
            const Prediction p = runner.classify(prompt, sop, note);
            CHECK(p.parse_status == ParseStatus::clean);
            CHECK(p.label == (world->scores.at(note.id) > boundary ? 1 : 0));
        }
    }
}

TEST_CASE("simulated summarizer steps the boundary by the critique count") {
    auto world = std::make_shared<const SimWorld>(build_world(400, 0.03, 9, SimParams{}));
    auto runner = sim_runner(world);
    const SOP sop = default_sop(world->term);
    Prompt base = make_initial_prompt(world->term);

    std::vector<Critique> critiques;
    for (const std::string id : {"sim-dev-0000", "sim-dev-0001", "sim-dev-0002"}) {
        critiques.push_back({id, ErrorKind::false_negative, "missed signal in " + id, true});
    }
    const Prompt next = runner.synthesize(critiques, base, sop, Direction::sensitivity, 1);
    CHECK(next.text.find("3 critiques") != std::string::npos);

    const double expected = apply_synthesis_step(*world, Direction::sensitivity, 3,
                                                 world->dev.positives(), world->initial_boundary);
    CHECK(SimBackend::boundary_from_prompt(next.text, *world) == expected);
    CHECK(SimBackend::boundary_from_prompt(next.text, *world) < world->initial_boundary);
}

TEST_CASE("simulated backend rejects unknown roles and notes") {
    auto world = std::make_shared<const SimWorld>(build_world(100, 0.1, 1, SimParams{}));
    SimBackend backend(world);
    CHECK_THROWS_AS(backend.complete({"# role: oracle\nhello", "x"}), ConfigError);
    CHECK_THROWS_AS(backend.complete({"no marker", "x"}), ConfigError);
    CHECK_THROWS_AS(backend.complete(
                        {"# role: specialist\nboundary=1.0", "[note:unknown-note]\ntext"}),
                    ConfigError);
}

TEST_CASE("trace finalize derives amplitude and collapse iterations") {
    SimTrace trace;
    const std::vector<double> sens = {1.0, 0.4, 0.0, 0.8, 0.0};
    for (std::size_t i = 0; i < sens.size(); ++i) {
        SimIterationPoint p;
        p.t = static_cast<int>(i);
        p.val.sensitivity = sens[i];
        trace.points.push_back(p);
    }
    trace.finalize();
    CHECK(trace.oscillation_amplitude == 1.0);
    CHECK(trace.collapse_iterations == std::vector<int>{2, 4});

    SimTrace flat;
    SimIterationPoint p;
    p.val.sensitivity = 0.5;
    flat.points = {p, p};
    flat.finalize();
    CHECK(flat.oscillation_amplitude == 0.0);
    CHECK(flat.collapse_iterations.empty());
}

TEST_CASE("instability experiment: deterministic, selector never below iteration 0") {
    const std::vector<double> prevalences = {0.03};
    InstabilityOptions options;
    options.base_seed = 11;

    const InstabilitySummary a = run_instability_experiment(prevalences, 3, SimParams{}, options);
    const InstabilitySummary b = run_instability_experiment(prevalences, 3, SimParams{}, options);
    REQUIRE(a.rows.size() == 1);
    CHECK(a.rows[0].seeds == 3);
    CHECK(a.rows[0].mean_amplitude == b.rows[0].mean_amplitude);
    CHECK(a.rows[0].collapse_seed_fraction == b.rows[0].collapse_seed_fraction);
    CHECK(a.rows[0].mean_selected_val_f1 == b.rows[0].mean_selected_val_f1);

    const auto csv_a = temp_dir() / "summary_a.csv";
    const auto csv_b = temp_dir() / "summary_b.csv";
    write_summary_csv(a, csv_a);
    write_summary_csv(b, csv_b);
    CHECK(slurp(csv_a) == slurp(csv_b));

    REQUIRE(a.sample_traces.size() == 1);
    const SimTrace& trace = a.sample_traces[0];
    REQUIRE(!trace.points.empty());
    // best_dev_f1 selection can never fall below the starting prompt on dev.
    CHECK(trace.points[static_cast<std::size_t>(trace.selected_index)].dev.f1 >=
          trace.points[0].dev.f1);

    const auto trace_a = temp_dir() / "trace_a.csv";
    const auto trace_b = temp_dir() / "trace_b.csv";
    trace.write_csv(trace_a);
    b.sample_traces[0].write_csv(trace_b);
    CHECK(slurp(trace_a) == slurp(trace_b));
    const std::string header = slurp(trace_a).substr(0, slurp(trace_a).find('\n'));
    CHECK(header ==
          "iteration,boundary,dev_sensitivity,dev_specificity,dev_f1,"
          "val_sensitivity,val_specificity,val_f1");

    CHECK_THROWS_AS(run_instability_experiment({}, 3, SimParams{}, options), ConfigError);
    CHECK_THROWS_AS(run_instability_experiment({0.03}, 0, SimParams{}, options), ConfigError);
}
