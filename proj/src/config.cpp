#include "promptlab/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "promptlab/errors.hpp"

namespace promptlab {

std::string to_string(RunMode m) { return m == RunMode::sim ? "sim" : "live"; }

namespace {

void check_keys(const nlohmann::json& obj, const std::set<std::string>& allowed,
                const std::string& section) {
    for (const auto& [key, _] : obj.items()) {
        if (!allowed.contains(key)) {
            throw ConfigError("unknown config key \"" + section + key + "\"");
        }
    }
}

DatasetSource parse_dataset(const nlohmann::json& j, const std::string& section) {
    check_keys(j, {"path", "synthetic"}, section);
    DatasetSource source;
    if (j.contains("path")) source.path = j["path"].get<std::string>();
    if (j.contains("synthetic")) {
        const auto& s = j["synthetic"];
        check_keys(s, {"n", "prevalence", "seed"}, section + "synthetic.");
        DatasetSource::Synthetic synth;
        if (s.contains("n")) synth.n = s["n"].get<std::size_t>();
        if (s.contains("prevalence")) synth.prevalence = s["prevalence"].get<double>();
        if (s.contains("seed")) synth.seed = s["seed"].get<std::uint64_t>();
        source.synthetic = synth;
    }
    if (source.path && source.synthetic) {
        throw ConfigError("config key \"" + section + "\" must set path or synthetic, not both");
    }
    return source;
}

}  // namespace

AppConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in, nullptr, /*allow_exceptions=*/true,
                                  /*ignore_comments=*/true);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config parse error in " + path.string() + ": " + e.what());
    }

    check_keys(j,
               {"mode", "term", "sop_path", "templates_dir", "datasets", "thresholds", "t_max",
                "guiding_enabled", "selection_strategy", "degradation_prevention", "seed",
                "parallelism", "backend", "sim", "lexicon_path", "compare_run", "out_dir"},
               "");

    AppConfig config;
    if (j.contains("mode")) {
        const std::string mode = j["mode"].get<std::string>();
        if (mode == "sim") config.mode = RunMode::sim;
        else if (mode == "live") config.mode = RunMode::live;
        else throw ConfigError("config key \"mode\" must be sim or live, got \"" + mode + "\"");
    }
    if (j.contains("term")) config.term = j["term"].get<std::string>();
    if (j.contains("sop_path")) config.sop_path = j["sop_path"].get<std::string>();
    if (j.contains("templates_dir")) config.templates_dir = j["templates_dir"].get<std::string>();
    if (j.contains("datasets")) {
        check_keys(j["datasets"], {"dev", "val"}, "datasets.");
        if (j["datasets"].contains("dev")) {
            config.dev = parse_dataset(j["datasets"]["dev"], "datasets.dev.");
        }
        if (j["datasets"].contains("val")) {
            config.val = parse_dataset(j["datasets"]["val"], "datasets.val.");
        }
    }
    if (j.contains("thresholds")) {
        check_keys(j["thresholds"], {"sensitivity", "specificity"}, "thresholds.");
        if (j["thresholds"].contains("sensitivity")) {
            config.thresholds.theta_sensitivity = j["thresholds"]["sensitivity"].get<double>();
        }
        if (j["thresholds"].contains("specificity")) {
            config.thresholds.theta_specificity = j["thresholds"]["specificity"].get<double>();
        }
    }
    if (j.contains("t_max")) config.t_max = j["t_max"].get<int>();
    if (j.contains("guiding_enabled")) config.guiding_enabled = j["guiding_enabled"].get<bool>();
    if (j.contains("selection_strategy")) {
        config.selection_strategy =
            selection_strategy_from_string(j["selection_strategy"].get<std::string>());
    }
    if (j.contains("degradation_prevention")) {
        config.degradation_prevention = j["degradation_prevention"].get<bool>();
    }
    if (j.contains("seed")) config.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("parallelism")) config.parallelism = j["parallelism"].get<int>();

    if (j.contains("backend")) {
        const auto& b = j["backend"];
        check_keys(b, {"endpoint", "model", "timeout_s", "retry_budget", "cache_dir"}, "backend.");
        if (b.contains("endpoint")) config.backend.endpoint_url = b["endpoint"].get<std::string>();
        if (b.contains("model")) config.backend.model_name = b["model"].get<std::string>();
        if (b.contains("timeout_s")) {
            config.backend.timeout = std::chrono::seconds(b["timeout_s"].get<int>());
        }
        if (b.contains("retry_budget")) config.backend.retry_budget = b["retry_budget"].get<int>();
        if (b.contains("cache_dir")) {
            config.backend.cache_dir = std::filesystem::path(b["cache_dir"].get<std::string>());
        }
    }
    // Endpoint credential comes from the environment only, never the file.
    if (const char* key = std::getenv("PROMPTLAB_API_KEY")) config.backend.api_key = key;

    if (j.contains("sim")) {
        const auto& s = j["sim"];
        check_keys(s,
                   {"n", "prevalence", "separation", "step_gain", "noise_scale", "prevalences",
                    "seeds", "write_all_traces"},
                   "sim.");
        if (s.contains("n")) config.sim_n = s["n"].get<std::size_t>();
        if (s.contains("prevalence")) config.sim_prevalence = s["prevalence"].get<double>();
        if (s.contains("separation")) config.sim_params.separation = s["separation"].get<double>();
        if (s.contains("step_gain")) config.sim_params.step_gain = s["step_gain"].get<double>();
        if (s.contains("noise_scale")) {
            config.sim_params.noise_scale = s["noise_scale"].get<double>();
        }
        if (s.contains("prevalences")) {
            config.sweep_prevalences = s["prevalences"].get<std::vector<double>>();
            for (double p : config.sweep_prevalences) {
                if (!(p > 0.0 && p < 1.0)) {
                    throw ConfigError("config key \"sim.prevalences\" entries must lie in (0,1)");
                }
            }
        }
        if (s.contains("seeds")) config.sweep_seeds = s["seeds"].get<std::size_t>();
        if (s.contains("write_all_traces")) {
            config.write_all_traces = s["write_all_traces"].get<bool>();
        }
    }
    if (j.contains("lexicon_path")) config.lexicon_path = j["lexicon_path"].get<std::string>();
    if (j.contains("compare_run")) config.compare_run = j["compare_run"].get<std::string>();
    if (j.contains("out_dir")) config.out_dir = j["out_dir"].get<std::string>();

    if (config.t_max < 1) throw ConfigError("config key \"t_max\" must be >= 1");
    if (config.parallelism < 1) throw ConfigError("config key \"parallelism\" must be >= 1");
    return config;
}

nlohmann::ordered_json config_to_json(const AppConfig& config) {
    nlohmann::ordered_json j;
    j["mode"] = to_string(config.mode);
    j["term"] = config.term;
    j["thresholds"] = {{"sensitivity", config.thresholds.theta_sensitivity},
                       {"specificity", config.thresholds.theta_specificity}};
    j["t_max"] = config.t_max;
    j["guiding_enabled"] = config.guiding_enabled;
    j["selection_strategy"] = to_string(config.selection_strategy);
    j["degradation_prevention"] = config.degradation_prevention;
    j["seed"] = config.seed;
    j["parallelism"] = config.parallelism;
    j["sim"] = {{"n", config.sim_n},
                {"prevalence", config.sim_prevalence},
                {"separation", config.sim_params.separation},
                {"step_gain", config.sim_params.step_gain},
                {"noise_scale", config.sim_params.noise_scale}};
    if (config.mode == RunMode::live) {
        j["backend"] = {{"endpoint", config.backend.endpoint_url},
                        {"model", config.backend.model_name}};
    }
    return j;
}

}  // namespace promptlab
