#include "nofis/run_config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "nofis/errors.hpp"

namespace nofis {

namespace {

using nlohmann::json;

void require_object(const json& j, const std::string& path) {
    if (!j.is_object()) throw ConfigError(path, "expected an object");
}

void reject_unknown_keys(const json& j, const std::string& path,
                         const std::set<std::string>& allowed) {
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!allowed.count(key)) throw ConfigError(path + "." + key, "unknown key");
    }
}

template <typename T>
T get_number(const json& j, const std::string& path, const std::string& key, T fallback,
             bool required = false) {
    if (!j.contains(key)) {
        if (required) throw ConfigError(path + "." + key, "required field missing");
        return fallback;
    }
    const json& v = j.at(key);
    if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(path + "." + key, "expected a boolean");
    } else {
        if (!v.is_number()) throw ConfigError(path + "." + key, "expected a number");
    }
    return v.get<T>();
}

std::string get_string(const json& j, const std::string& path, const std::string& key,
                       const std::string& fallback, bool required = false) {
    if (!j.contains(key)) {
        if (required) throw ConfigError(path + "." + key, "required field missing");
        return fallback;
    }
    if (!j.at(key).is_string()) throw ConfigError(path + "." + key, "expected a string");
    return j.at(key).get<std::string>();
}

ScheduleSpec parse_schedule(const json& block, const std::string& path, const Problem& problem,
                            long long pilot_n) {
    ScheduleSpec spec;
    spec.pilot_n = pilot_n;
    if (!block.contains("schedule")) {
        spec.auto_pilot = true;
        return spec;
    }
    const json& s = block.at("schedule");
    if (s.is_string()) {
        if (s.get<std::string>() != "auto") {
            throw ConfigError(path + ".schedule", "expected \"auto\" or an array of levels");
        }
        spec.auto_pilot = true;
        return spec;
    }
    if (!s.is_array() || s.empty()) {
        throw ConfigError(path + ".schedule", "expected \"auto\" or a non-empty array");
    }
    try {
        if (s.front().is_array()) {
            // Explicit [lower, upper] pairs.
            std::vector<Bound> levels;
            for (const json& entry : s) {
                if (!entry.is_array() || entry.size() != 2 || !entry[0].is_number() ||
                    !entry[1].is_number()) {
                    throw std::invalid_argument("each level must be a [lower, upper] pair");
                }
                levels.push_back(Bound::band(entry[0].get<double>(), entry[1].get<double>()));
            }
            if (!(levels.back() == problem.bound())) {
                throw std::invalid_argument("last level must equal the problem bound");
            }
            spec.levels = ThresholdSchedule::from_bounds(std::move(levels)).levels;
            return spec;
        }
        std::vector<double> values;
        for (const json& entry : s) {
            if (!entry.is_number()) throw std::invalid_argument("levels must be numbers");
            values.push_back(entry.get<double>());
        }
        const Bound& b = problem.bound();
        const bool band = std::isfinite(b.lower) && std::isfinite(b.upper);
        // Single-sided problems take raw g thresholds; bands take margins.
        const ThresholdSchedule schedule = band ? ThresholdSchedule::from_margins(values, b)
                                                : ThresholdSchedule::from_levels(values, b);
        spec.levels = schedule.levels;
        return spec;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path + ".schedule", e.what());
    }
}

MethodSpec parse_nofis(const json& block, const std::string& path, const Problem& problem) {
    require_object(block, path);
    reject_unknown_keys(block, path,
                        {"M", "K", "E", "N", "tau", "n_is", "freeze", "learning_rate", "loss",
                         "stages", "schedule", "pilot_n", "hidden", "scale_clamp", "seed"});
    NofisSpec spec;
    spec.train.steps = get_number<int>(block, path, "M", 0, true);
    spec.train.layers_per_step = get_number<int>(block, path, "K", 8);
    spec.train.epochs = get_number<int>(block, path, "E", 0, true);
    spec.train.batch_size = get_number<int>(block, path, "N", 0, true);
    spec.train.temperature = get_number<double>(block, path, "tau", 10.0);
    spec.train.n_is = get_number<long long>(block, path, "n_is", 0, true);
    spec.train.freeze = get_number<bool>(block, path, "freeze", true);
    spec.train.learning_rate = get_number<double>(block, path, "learning_rate", 1e-3);
    spec.train.seed = get_number<std::uint64_t>(block, path, "seed", 0);

    const std::string loss = get_string(block, path, "loss", "reverse");
    if (loss == "reverse") {
        spec.train.loss = LossVariant::ReverseKl;
    } else if (loss == "forward") {
        spec.train.loss = LossVariant::ForwardKl;
    } else {
        throw ConfigError(path + ".loss", "expected \"reverse\" or \"forward\"");
    }
    const std::string stages = get_string(block, path, "stages", "staged");
    if (stages == "staged") {
        spec.train.stages = StageVariant::Staged;
    } else if (stages == "terminal_only") {
        spec.train.stages = StageVariant::TerminalOnly;
    } else if (stages == "mean_of_kls") {
        spec.train.stages = StageVariant::MeanOfKls;
    } else {
        throw ConfigError(path + ".stages",
                          "expected \"staged\", \"terminal_only\" or \"mean_of_kls\"");
    }
    try {
        spec.train.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path, e.what());
    }

    if (block.contains("hidden")) {
        const json& h = block.at("hidden");
        if (!h.is_array() || h.empty()) throw ConfigError(path + ".hidden", "expected an array");
        spec.hidden.clear();
        for (const json& v : h) {
            if (!v.is_number_integer() || v.get<int>() < 1) {
                throw ConfigError(path + ".hidden", "widths must be positive integers");
            }
            spec.hidden.push_back(v.get<int>());
        }
    }
    spec.scale_clamp = get_number<double>(block, path, "scale_clamp", 5.0);
    if (!(spec.scale_clamp > 0.0)) throw ConfigError(path + ".scale_clamp", "must be > 0");

    const long long pilot_n = get_number<long long>(block, path, "pilot_n", 100000);
    spec.schedule = parse_schedule(block, path, problem, pilot_n);
    if (!spec.schedule.auto_pilot &&
        static_cast<int>(spec.schedule.levels.size()) != spec.train.steps) {
        throw ConfigError(path + ".schedule", "level count must equal M");
    }
    return spec;
}

MethodSpec parse_mc(const json& block, const std::string& path) {
    require_object(block, path);
    reject_unknown_keys(block, path, {"n"});
    McSpec spec;
    spec.n = get_number<long long>(block, path, "n", 0, true);
    if (spec.n < 1) throw ConfigError(path + ".n", "must be >= 1");
    return spec;
}

MethodSpec parse_sus(const json& block, const std::string& path) {
    require_object(block, path);
    reject_unknown_keys(block, path, {"p0", "n_level", "proposal_std", "max_levels"});
    SusSpec spec;
    spec.config.p0 = get_number<double>(block, path, "p0", 0.1);
    spec.config.n_level = get_number<int>(block, path, "n_level", 0, true);
    spec.config.proposal_std = get_number<double>(block, path, "proposal_std", 1.0);
    spec.config.max_levels = get_number<int>(block, path, "max_levels", 20);
    try {
        spec.config.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path, e.what());
    }
    return spec;
}

MethodSpec parse_sss(const json& block, const std::string& path) {
    require_object(block, path);
    reject_unknown_keys(block, path, {"scales", "n_per_scale"});
    SssSpec spec;
    if (block.contains("scales")) {
        const json& s = block.at("scales");
        if (!s.is_array()) throw ConfigError(path + ".scales", "expected an array");
        spec.config.scales.clear();
        for (const json& v : s) {
            if (!v.is_number()) throw ConfigError(path + ".scales", "scales must be numbers");
            spec.config.scales.push_back(v.get<double>());
        }
    }
    spec.config.n_per_scale = get_number<long long>(block, path, "n_per_scale", 0, true);
    try {
        spec.config.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path, e.what());
    }
    return spec;
}

MethodSpec parse_ais(const json& block, const std::string& path) {
    require_object(block, path);
    reject_unknown_keys(block, path,
                        {"components", "elite_fraction", "iterations", "n_per_iter", "final_n",
                         "cov_floor"});
    AisSpec spec;
    spec.config.components = get_number<int>(block, path, "components", 2);
    spec.config.elite_fraction = get_number<double>(block, path, "elite_fraction", 0.1);
    spec.config.iterations = get_number<int>(block, path, "iterations", 0, true);
    spec.config.n_per_iter = get_number<long long>(block, path, "n_per_iter", 0, true);
    spec.config.final_n = get_number<long long>(block, path, "final_n", 0, true);
    spec.config.cov_floor = get_number<double>(block, path, "cov_floor", 1e-6);
    try {
        spec.config.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path, e.what());
    }
    return spec;
}

MethodSpec parse_method_block(const std::string& method, const json& parent,
                              const std::string& parent_path, const Problem& problem) {
    if (!parent.contains(method)) {
        throw ConfigError(parent_path + "." + method,
                          "method block missing for method \"" + method + "\"");
    }
    const json& block = parent.at(method);
    const std::string path = parent_path + "." + method;
    if (method == "nofis") return parse_nofis(block, path, problem);
    if (method == "mc") return parse_mc(block, path);
    if (method == "sus") return parse_sus(block, path);
    if (method == "sss") return parse_sss(block, path);
    if (method == "ais") return parse_ais(block, path);
    throw ConfigError(parent_path + ".method",
                      "unknown method \"" + method + "\" (expected nofis|mc|sus|sss|ais)");
}

}  // namespace

RunConfig parse_run_config(const json& j) {
    require_object(j, "config");
    reject_unknown_keys(j, "config",
                        {"problem", "repeats", "seed", "out_dir", "save_checkpoint", "golden",
                         "method", "methods", "nofis", "mc", "sus", "sss", "ais"});
    RunConfig config;
    config.echo = j;
    config.problem = get_string(j, "config", "problem", "", true);
    Problem problem = [&] {
        try {
            return make_problem(config.problem);
        } catch (const CatalogError& e) {
            throw ConfigError("config.problem", e.what());
        }
    }();

    config.repeats = get_number<int>(j, "config", "repeats", 1);
    if (config.repeats < 1) throw ConfigError("config.repeats", "must be >= 1");
    config.seed = get_number<std::uint64_t>(j, "config", "seed", 0);
    config.out_dir = get_string(j, "config", "out_dir", "");
    config.save_checkpoint = get_number<bool>(j, "config", "save_checkpoint", false);

    if (j.contains("golden")) {
        const json& g = j.at("golden");
        require_object(g, "config.golden");
        reject_unknown_keys(g, "config.golden", {"mode", "n", "step"});
        config.golden_mode = get_string(g, "config.golden", "mode", "catalog");
        const std::set<std::string> modes = {"catalog", "analytic", "quadrature2d", "mc"};
        if (!modes.count(config.golden_mode)) {
            throw ConfigError("config.golden.mode",
                              "expected catalog|analytic|quadrature2d|mc");
        }
        config.golden_mc_n = get_number<long long>(g, "config.golden", "n", config.golden_mc_n);
        if (config.golden_mc_n < 1) throw ConfigError("config.golden.n", "must be >= 1");
        config.golden_quad_step =
            get_number<double>(g, "config.golden", "step", config.golden_quad_step);
        if (!(config.golden_quad_step > 0.0)) throw ConfigError("config.golden.step", "must be > 0");
    }

    const bool has_single = j.contains("method");
    const bool has_list = j.contains("methods");
    if (has_single == has_list) {
        throw ConfigError("config", "exactly one of \"method\" or \"methods\" is required");
    }
    if (has_single) {
        const std::string method = get_string(j, "config", "method", "", true);
        config.methods.emplace_back(method, parse_method_block(method, j, "config", problem));
    } else {
        const json& list = j.at("methods");
        if (!list.is_array() || list.empty()) {
            throw ConfigError("config.methods", "expected a non-empty array");
        }
        for (std::size_t i = 0; i < list.size(); ++i) {
            const json& entry = list[i];
            const std::string path = "config.methods[" + std::to_string(i) + "]";
            require_object(entry, path);
            const std::string method = get_string(entry, path, "method", "", true);
            reject_unknown_keys(entry, path, {"method", method});
            config.methods.emplace_back(method, parse_method_block(method, entry, path, problem));
        }
    }
    return config;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("config: cannot read " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(path, std::string("invalid JSON: ") + e.what());
    }
    return parse_run_config(j);
}

Golden resolve_golden(const RunConfig& config, GoldenCache* cache) {
    if (config.golden_mode == "catalog") {
        const Problem problem = make_problem(config.problem);
        if (!problem.golden()) {
            throw ConfigError("config.golden.mode",
                              "problem " + config.problem + " carries no catalog golden value");
        }
        return *problem.golden();
    }
    OracleRequest request;
    if (config.golden_mode == "analytic") {
        request.mode = OracleMode::Analytic;
    } else if (config.golden_mode == "quadrature2d") {
        request.mode = OracleMode::Quadrature2d;
        request.quad_step = config.golden_quad_step;
    } else {
        request.mode = OracleMode::Mc;
        request.mc_n = config.golden_mc_n;
    }
    if (cache) return cache->get_or_compute(config.problem, request);
    return golden_oracle(config.problem, request);
}

}  // namespace nofis
