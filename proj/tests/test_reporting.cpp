#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>

#include "promptlab/errors.hpp"
#include "promptlab/reporting.hpp"

using namespace promptlab;
namespace fs = std::filesystem;

namespace {

Metrics with_f1(double f1) {
    Metrics m;
    m.f1 = f1;
    m.sensitivity = f1;  // placeholder; tests that care set it explicitly
    m.specificity = 1.0;
    m.accuracy = 1.0;
    return m;
}

Metrics with_sens(double sens, double accuracy = 0.5) {
    Metrics m;
    m.sensitivity = sens;
    m.specificity = 0.5;
    m.f1 = sens;
    m.accuracy = accuracy;
    return m;
}

ConditionTrajectory condition(const std::string& name, double prevalence,
                              const std::vector<double>& val_f1, std::size_t selected) {
    ConditionTrajectory c;
    c.condition = name;
    c.prevalence = prevalence;
    c.selected_index = selected;
    for (double f1 : val_f1) {
        c.dev_metrics.push_back(with_f1(f1));
        c.val_metrics.push_back(with_f1(f1));
    }
    return c;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

TEST_CASE("percent_delta rounds half away from zero") {
    // Anchor values from hand-computed trajectories.
    CHECK(percent_delta(0.61, 0.22) == -64);
    CHECK(percent_delta(0.30, 0.25) == -17);
    CHECK(percent_delta(0.058, 0.25) == 331);
    CHECK(percent_delta(0.80, 0.76) == -5);
    CHECK(percent_delta(0.5, 0.5) == 0);
    CHECK(percent_delta(1.0, 2.0) == 100);
    // Half-away-from-zero at the .5 boundary, both signs. Integer-valued
    // doubles keep the ratio exact.
    CHECK(percent_delta(200.0, 201.0) == 1);   // +0.5% rounds away from zero
    CHECK(percent_delta(200.0, 199.0) == -1);  // -0.5% too
    CHECK(percent_delta(200.0, 202.0) == 1);
    CHECK(percent_delta(200.0, 203.0) == 2);   // +1.5%
}

TEST_CASE("degradation table reads first (t=1) and final refinement F1") {
    const auto rows = degradation_table({condition("brain fog", 0.03, {0.1, 0.61, 0.4, 0.22}, 1),
                                         condition("chest pain", 0.12, {0.2, 0.30, 0.25}, 1)});
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].first_f1 == 0.61);  // t=0 is the unrefined seed prompt
    CHECK(rows[0].final_f1 == 0.22);
    CHECK(rows[0].delta_pct == -64);
    CHECK(rows[1].delta_pct == -17);

    const std::string csv = degradation_csv(rows);
    CHECK(csv.substr(0, csv.find('\n')) ==
          "condition,prevalence,first_iter_f1,final_iter_f1,delta_pct");
    CHECK(csv.find("brain fog,0.030000,0.610000,0.220000,-64%") != std::string::npos);
    CHECK(csv.find("chest pain,0.120000,0.300000,0.250000,-17%") != std::string::npos);
}

TEST_CASE("degradation guards: zero first F1 and missing iterations") {
    const auto rows = degradation_table({condition("flat", 0.03, {0.0, 0.0, 0.3}, 2)});
    CHECK_FALSE(rows[0].delta_pct.has_value());
    CHECK(degradation_csv(rows).find("n/a") != std::string::npos);

    CHECK_THROWS_AS(degradation_table({condition("short", 0.03, {0.5}, 0)}), LoadError);

    ConditionTrajectory holey = condition("holey", 0.03, {0.5, 0.6, 0.7}, 0);
    holey.val_metrics[1].reset();
    CHECK_THROWS_AS(degradation_table({holey}), LoadError);

    // Positive deltas carry an explicit sign.
    const auto up = degradation_table({condition("up", 0.03, {0.0, 0.058, 0.25}, 2)});
    CHECK(up[0].delta_pct == 331);
    CHECK(degradation_csv(up).find("+331%") != std::string::npos);
}

TEST_CASE("comparison table guards division by a zero lexicon F1") {
    const auto rows = comparison_table({{"brain fog", 0.03, 0.25, 0.058},
                                        {"degenerate", 0.03, 0.25, 0.0}});
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].delta_pct == 331);
    CHECK_FALSE(rows[1].delta_pct.has_value());

    const std::string csv = comparison_csv(rows);
    CHECK(csv.substr(0, csv.find('\n')) ==
          "condition,prevalence,optimized_f1,lexicon_f1,delta_pct");
    CHECK(csv.find("+331%") != std::string::npos);
    CHECK(csv.find("degenerate,0.030000,0.250000,0.000000,n/a") != std::string::npos);
}

TEST_CASE("oscillation report: amplitude, collapses, masking") {
    ConditionTrajectory c;
    c.condition = "brain fog";
    c.prevalence = 0.03;
    const std::vector<double> sens = {1.0, 0.4, 0.0, 0.8, 0.2, 0.0, 0.3};
    for (double s : sens) {
        c.dev_metrics.push_back(with_sens(s));
        c.val_metrics.push_back(with_sens(s));
    }
    // Iteration 5 additionally shows the masking pattern: zero sensitivity
    // with all-negative-level accuracy.
    c.val_metrics[5] = with_sens(0.0, 0.97);

    const OscillationReport report = oscillation_report(c);
    CHECK(report.amplitude == 1.0);
    CHECK(report.collapse_iterations == std::vector<int>{2, 5});
    CHECK(report.masking_iterations == std::vector<int>{5});

    const auto j = oscillation_json(report);
    CHECK(j["amplitude"] == 1.0);
    CHECK(j["collapse_iterations"] == nlohmann::json({2, 5}));
    CHECK(j["masking_iterations"] == nlohmann::json({5}));

    // Unevaluated iterations are skipped, not treated as zeros.
    ConditionTrajectory sparse = c;
    for (std::size_t t = 1; t < sparse.val_metrics.size(); t += 2) sparse.val_metrics[t].reset();
    const OscillationReport sparse_report = oscillation_report(sparse);
    CHECK(sparse_report.collapse_iterations == std::vector<int>{2});

    ConditionTrajectory tiny;
    tiny.condition = "tiny";
    tiny.val_metrics = {with_sens(0.5)};
    CHECK_THROWS_AS(oscillation_report(tiny), LoadError);
}

TEST_CASE("selected_vs_optimal finds the retrospective argmax, earliest tie") {
    ConditionTrajectory c = condition("brain fog", 0.03, {0.1, 0.6, 0.3, 0.6}, 2);
    const SelectedVsOptimalRow row = selected_vs_optimal(c);
    CHECK(row.selected_index == 2);
    CHECK(row.selected_val_f1 == 0.3);
    CHECK(row.optimal_index == 1);  // earliest of the 0.6 tie
    CHECK(row.optimal_val_f1 == 0.6);
    CHECK(row.optimal_val_f1 >= row.selected_val_f1);

    const std::string csv = selected_vs_optimal_csv({row});
    CHECK(csv.substr(0, csv.find('\n')) ==
          "condition,selected_iteration,selected_val_f1,optimal_iteration,optimal_val_f1");
    CHECK(csv.find("brain fog,2,0.300000,1,0.600000") != std::string::npos);

    ConditionTrajectory holey = c;
    holey.val_metrics[3].reset();
    CHECK_THROWS_AS(selected_vs_optimal(holey), LoadError);
}

TEST_CASE("figure series lists per-iteration validation sensitivity") {
    ConditionTrajectory c;
    c.condition = "brain fog";
    c.val_metrics = {with_sens(1.0), std::nullopt, with_sens(0.25)};
    const std::string csv = figure_csv(c);
    CHECK(csv ==
          "iteration,val_sensitivity\n"
          "0,1.000000\n"
          "2,0.250000\n");
}

TEST_CASE("report directory renders byte-identically on regeneration") {
    ConditionTrajectory c;
    c.condition = "brain fog";
    c.prevalence = 0.03;
    c.selected_index = 1;
    for (double s : {0.7, 0.5, 0.0, 0.6}) {
        c.dev_metrics.push_back(with_sens(s));
        c.val_metrics.push_back(with_sens(s));
    }

    const auto base = fs::temp_directory_path() / "promptlab_reporting_tests";
    fs::remove_all(base);
    write_report_dir(base / "a", c);
    write_report_dir(base / "b", c);
    for (const std::string name :
         {"degradation.csv", "oscillation.json", "selected_vs_optimal.csv", "figure2a.csv"}) {
        CHECK(slurp(base / "a" / name) == slurp(base / "b" / name));
    }
    const auto j = nlohmann::json::parse(slurp(base / "a" / "oscillation.json"));
    CHECK(j["collapse_iterations"] == nlohmann::json({2}));
}
