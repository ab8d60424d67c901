#include "promptlab/artifacts.hpp"

#include <fstream>
#include <sstream>

#include "promptlab/errors.hpp"

namespace promptlab {

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write artifact: " + path.string());
    out << text;
}

nlohmann::json parse_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("missing artifact file: " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw LoadError("truncated or invalid artifact " + path.string() + ": " + e.what());
    }
}

}  // namespace

nlohmann::ordered_json metrics_to_json(const Metrics& m) {
    nlohmann::ordered_json j;
    j["sensitivity"] = m.sensitivity ? nlohmann::ordered_json(*m.sensitivity)
                                     : nlohmann::ordered_json(nullptr);
    j["specificity"] = m.specificity ? nlohmann::ordered_json(*m.specificity)
                                     : nlohmann::ordered_json(nullptr);
    j["precision"] =
        m.precision ? nlohmann::ordered_json(*m.precision) : nlohmann::ordered_json(nullptr);
    j["f1"] = m.f1;
    j["accuracy"] = m.accuracy;
    return j;
}

Metrics metrics_from_json(const nlohmann::json& j) {
    Metrics m;
    if (!j.at("sensitivity").is_null()) m.sensitivity = j["sensitivity"].get<double>();
    if (!j.at("specificity").is_null()) m.specificity = j["specificity"].get<double>();
    if (!j.at("precision").is_null()) m.precision = j["precision"].get<double>();
    m.f1 = j.at("f1").get<double>();
    m.accuracy = j.at("accuracy").get<double>();
    return m;
}

nlohmann::ordered_json prompt_to_json(const Prompt& p) {
    nlohmann::ordered_json j;
    j["id"] = p.id;
    j["iteration"] = p.iteration;
    j["text"] = p.text;
    j["origin"] = to_string(p.origin);
    j["parent_id"] =
        p.parent_id ? nlohmann::ordered_json(*p.parent_id) : nlohmann::ordered_json(nullptr);
    return j;
}

Prompt prompt_from_json(const nlohmann::json& j) {
    Prompt p;
    p.id = j.at("id").get<std::string>();
    p.iteration = j.at("iteration").get<int>();
    p.text = j.at("text").get<std::string>();
    p.origin = prompt_origin_from_string(j.at("origin").get<std::string>());
    if (!j.at("parent_id").is_null()) p.parent_id = j["parent_id"].get<std::string>();
    return p;
}

namespace {

nlohmann::ordered_json guidance_to_json(const GuidanceDirective& g) {
    return {{"kind", to_string(g.kind)}, {"text", g.text}, {"triggered_at", g.triggered_at}};
}

GuidanceDirective guidance_from_json(const nlohmann::json& j) {
    GuidanceDirective g;
    g.kind = j.at("kind").get<std::string>() == "switch_target_metric"
                 ? DirectiveKind::switch_target_metric
                 : DirectiveKind::rewrite_strategy;
    g.text = j.at("text").get<std::string>();
    g.triggered_at = j.at("triggered_at").get<int>();
    return g;
}

}  // namespace

nlohmann::ordered_json trajectory_to_json(const Trajectory& t,
                                          const std::optional<ValidationReport>& validation) {
    nlohmann::ordered_json j;
    j["records"] = nlohmann::ordered_json::array();
    for (const auto& rec : t.records) {
        nlohmann::ordered_json r;
        r["t"] = rec.t;
        r["prompt"] = prompt_to_json(rec.prompt);
        r["dev_metrics"] = metrics_to_json(rec.dev_metrics);
        r["target_metric"] = to_string(rec.target_metric);
        r["critique_count"] = rec.critique_count;
        r["filtered_count"] = rec.filtered_count;
        r["reverted"] = rec.reverted;
        r["guidance"] = rec.guidance ? guidance_to_json(*rec.guidance)
                                     : nlohmann::ordered_json(nullptr);
        r["predictions_ref"] = rec.predictions_ref;
        j["records"].push_back(std::move(r));
    }
    j["selected_index"] = t.selected_index ? nlohmann::ordered_json(*t.selected_index)
                                           : nlohmann::ordered_json(nullptr);
    j["selection_strategy"] = to_string(t.selection_strategy);
    j["thresholds"] = {{"sensitivity", t.thresholds.theta_sensitivity},
                       {"specificity", t.thresholds.theta_specificity}};
    j["t_max"] = t.t_max;
    j["termination_reason"] = to_string(t.termination_reason);
    if (validation) {
        nlohmann::ordered_json v;
        v["per_record"] = nlohmann::ordered_json::array();
        for (const auto& m : validation->per_record) {
            v["per_record"].push_back(m ? metrics_to_json(*m) : nlohmann::ordered_json(nullptr));
        }
        v["selected_dev_f1"] = validation->selected_dev_f1;
        v["selected_val_f1"] = validation->selected_val_f1;
        v["dev_val_gap"] = validation->dev_val_gap;
        j["validation"] = std::move(v);
    } else {
        j["validation"] = nullptr;
    }
    return j;
}

void write_run_artifacts(const std::filesystem::path& dir,
                         const nlohmann::ordered_json& run_config, Trajectory& trajectory,
                         const std::optional<ValidationReport>& validation) {
    std::filesystem::create_directories(dir);
    write_text(dir / "run.json", run_config.dump(2) + "\n");

    for (auto& rec : trajectory.records) {
        const auto iter_dir = dir / ("iteration_" + std::to_string(rec.t));
        std::filesystem::create_directories(iter_dir);
        write_text(iter_dir / "prompt.txt", rec.prompt.text + "\n");
        write_text(iter_dir / "metrics.json", metrics_to_json(rec.dev_metrics).dump(2) + "\n");

        std::ostringstream critiques;
        for (const auto& c : rec.critiques) {
            nlohmann::ordered_json line{{"note_id", c.note_id},
                                        {"error_kind", to_string(c.error_kind)},
                                        {"text", c.text},
                                        {"actionable", c.actionable}};
            critiques << line.dump() << "\n";
        }
        write_text(iter_dir / "critiques.jsonl", critiques.str());

        std::ostringstream predictions;
        for (const auto& p : rec.predictions) {
            nlohmann::ordered_json line{{"note_id", p.note_id},
                                        {"label", p.label},
                                        {"parse_status", to_string(p.parse_status)}};
            predictions << line.dump() << "\n";
        }
        write_text(iter_dir / "predictions.jsonl", predictions.str());
        rec.predictions_ref = "iteration_" + std::to_string(rec.t) + "/predictions.jsonl";
    }

    write_text(dir / "trajectory.json", trajectory_to_json(trajectory, validation).dump(2) + "\n");
}

RunArtifacts load_run_artifacts(const std::filesystem::path& dir) {
    RunArtifacts artifacts;
    artifacts.run_config = parse_json_file(dir / "run.json");
    const nlohmann::json j = parse_json_file(dir / "trajectory.json");

    Trajectory& t = artifacts.trajectory;
    for (const auto& r : j.at("records")) {
        IterationRecord rec;
        rec.t = r.at("t").get<int>();
        rec.prompt = prompt_from_json(r.at("prompt"));
        rec.dev_metrics = metrics_from_json(r.at("dev_metrics"));
        rec.target_metric = target_metric_from_string(r.at("target_metric").get<std::string>());
        rec.critique_count = r.at("critique_count").get<std::size_t>();
        rec.filtered_count = r.at("filtered_count").get<std::size_t>();
        rec.reverted = r.at("reverted").get<bool>();
        if (!r.at("guidance").is_null()) rec.guidance = guidance_from_json(r["guidance"]);
        rec.predictions_ref = r.at("predictions_ref").get<std::string>();
        if (!rec.predictions_ref.empty() && !std::filesystem::exists(dir / rec.predictions_ref)) {
            throw LoadError("missing artifact file: " + (dir / rec.predictions_ref).string());
        }
        t.records.push_back(std::move(rec));
    }
    if (!j.at("selected_index").is_null()) {
        t.selected_index = j["selected_index"].get<std::size_t>();
    }
    t.selection_strategy =
        selection_strategy_from_string(j.at("selection_strategy").get<std::string>());
    t.thresholds.theta_sensitivity = j.at("thresholds").at("sensitivity").get<double>();
    t.thresholds.theta_specificity = j.at("thresholds").at("specificity").get<double>();
    t.t_max = j.at("t_max").get<int>();
    t.termination_reason =
        termination_reason_from_string(j.at("termination_reason").get<std::string>());

    if (!j.at("validation").is_null()) {
        ValidationReport v;
        for (const auto& m : j["validation"].at("per_record")) {
            v.per_record.push_back(m.is_null() ? std::nullopt
                                               : std::optional<Metrics>(metrics_from_json(m)));
        }
        v.selected_dev_f1 = j["validation"].at("selected_dev_f1").get<double>();
        v.selected_val_f1 = j["validation"].at("selected_val_f1").get<double>();
        v.dev_val_gap = j["validation"].at("dev_val_gap").get<double>();
        artifacts.validation = std::move(v);
    }
    return artifacts;
}

}  // namespace promptlab
