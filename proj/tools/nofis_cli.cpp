#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

#include "nofis/errors.hpp"
#include "nofis/harness.hpp"
#include "nofis/heatmap.hpp"
#include "nofis/run_config.hpp"

namespace fs = std::filesystem;
using namespace nofis;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitIo = 3;

struct CliOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> repeats;
    std::optional<std::string> out_dir;
    std::optional<std::string> method;
};

std::string resolve_out_dir(const RunConfig& config, const CliOverrides& overrides) {
    if (overrides.out_dir) return *overrides.out_dir;
    if (!config.out_dir.empty()) return config.out_dir;
    if (const char* env = std::getenv("NOFIS_OUT_DIR")) return env;
    return ".";
}

/// Applies command-line overrides to both the parsed config and its echo, so
/// reports stay replayable byte-for-byte.
RunConfig apply_overrides(RunConfig config, const CliOverrides& overrides) {
    if (overrides.seed) {
        config.seed = *overrides.seed;
        config.echo["seed"] = *overrides.seed;
    }
    if (overrides.repeats) {
        config.repeats = *overrides.repeats;
        config.echo["repeats"] = *overrides.repeats;
    }
    if (overrides.method) {
        config.echo["method"] = *overrides.method;
    }
    return config;
}

Golden config_golden(const RunConfig& config, const std::string& out_dir) {
    GoldenCache cache((fs::path(out_dir) / "golden_cache.json").string());
    return resolve_golden(config, &cache);
}

int run_command(const std::string& config_path, const CliOverrides& overrides) {
    RunConfig config = apply_overrides(load_run_config(config_path), overrides);

    std::vector<std::pair<std::string, MethodSpec>> methods = config.methods;
    if (overrides.method) {
        const auto it =
            std::find_if(methods.begin(), methods.end(),
                         [&](const auto& m) { return m.first == *overrides.method; });
        if (it == methods.end()) {
            throw ConfigError("config." + *overrides.method,
                              "--method selects a block the config does not define");
        }
        methods = {*it};
    }
    if (methods.size() != 1) {
        throw ConfigError("config.methods", "run expects exactly one method; use compare for sets");
    }

    const std::string out_dir = resolve_out_dir(config, overrides);
    fs::create_directories(out_dir);
    const Golden golden = config_golden(config, out_dir);

    const auto& [name, spec] = methods.front();
    AggregateReport agg = run_trials(config.problem, spec, config.repeats, config.seed, golden);

    if (config.save_checkpoint && std::holds_alternative<NofisSpec>(spec)) {
        for (const TrialResult& trial : agg.trials) {
            if (trial.failed()) continue;
            Problem problem = make_problem(config.problem);
            Rng rng(trial.seed);
            FlowModel model;
            run_method(spec, problem, rng, &model);
            const fs::path path = fs::path(out_dir) / ("model_" + config.problem + "_seed" +
                                                       std::to_string(trial.seed) + ".bin");
            checkpoint_save(model, path.string());
            std::cout << "checkpoint: " << path.string() << "\n";
        }
    }

    const fs::path report_path =
        fs::path(out_dir) / ("report_" + config.problem + "_" + name + ".json");
    write_run_report(report_path.string(), config.echo, {agg});
    std::cout << "report: " << report_path.string() << "\n";
    std::cout << name << " on " << config.problem << ": mean log10 error " << agg.mean_log_error
              << " over " << agg.successes << "/" << agg.trials.size()
              << " trials, mean calls " << agg.mean_calls << "\n";
    return agg.failures > 0 ? kExitRuntime : kExitOk;
}

int compare_command(const std::string& config_path, const CliOverrides& overrides) {
    RunConfig config = apply_overrides(load_run_config(config_path), overrides);
    const std::string out_dir = resolve_out_dir(config, overrides);
    fs::create_directories(out_dir);
    const Golden golden = config_golden(config, out_dir);

    std::vector<AggregateReport> aggregates;
    for (const auto& [name, spec] : config.methods) {
        try {
            aggregates.push_back(
                run_trials(config.problem, spec, config.repeats, config.seed, golden));
        } catch (const std::exception& e) {
            AggregateReport failed;
            failed.method = name;
            failed.problem = config.problem;
            failed.golden = golden;
            failed.failures = config.repeats;
            TrialResult t;
            t.method = name;
            t.problem = config.problem;
            t.error = e.what();
            failed.trials.push_back(std::move(t));
            aggregates.push_back(std::move(failed));
            std::cerr << name << ": failed (" << e.what() << ")\n";
        }
    }
    std::sort(aggregates.begin(), aggregates.end(),
              [](const AggregateReport& a, const AggregateReport& b) { return a.method < b.method; });

    const fs::path report_path = fs::path(out_dir) / ("report_" + config.problem + "_compare.json");
    write_run_report(report_path.string(), config.echo, aggregates);
    std::cout << "report: " << report_path.string() << "\n";
    std::cout << "method      calls        mean_err  median_err  failures\n";
    bool any_success = false;
    for (const AggregateReport& agg : aggregates) {
        std::printf("%-10s  %-11.0f  %-8.3f  %-10.3f  %d/%zu\n", agg.method.c_str(),
                    agg.mean_calls, agg.mean_log_error, agg.median_log_error, agg.failures,
                    agg.trials.size());
        any_success = any_success || agg.successes > 0;
    }
    return any_success ? kExitOk : kExitRuntime;
}

int visualize_command(const std::string& checkpoint_path, const std::string& out_path,
                      const HeatmapGrid& grid) {
    const FlowModel model = checkpoint_load(checkpoint_path);
    const Heatmap heatmap = heatmap_from_flow(model, grid);
    write_heatmap_csv(heatmap, out_path);
    std::cout << "heatmap: " << out_path << " (grid mass " << heatmap.total_mass() << ")\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Rare-event probability estimation with flow-based importance sampling"};
    app.require_subcommand(1);

    std::string config_path;
    CliOverrides overrides;
    std::string checkpoint_path;
    std::string heatmap_out = "heatmap.csv";
    HeatmapGrid grid;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "Path to the JSON run configuration")->required();
        cmd->add_option_function<std::uint64_t>(
            "--seed", [&](const std::uint64_t& v) { overrides.seed = v; },
            "Override the base seed");
        cmd->add_option_function<int>(
            "--repeats", [&](const int& v) { overrides.repeats = v; },
            "Override the trial count");
        cmd->add_option_function<std::string>(
            "--out", [&](const std::string& v) { overrides.out_dir = v; },
            "Output directory (default: $NOFIS_OUT_DIR or .)");
    };

    CLI::App* run = app.add_subcommand("run", "Run one estimator and write a report");
    add_common(run);
    run->add_option_function<std::string>(
        "--method", [&](const std::string& v) { overrides.method = v; },
        "Select a method block from the config");

    CLI::App* compare = app.add_subcommand("compare", "Run every configured method and tabulate");
    add_common(compare);

    CLI::App* visualize = app.add_subcommand("visualize", "Emit a density heatmap from a checkpoint");
    visualize->add_option("--checkpoint", checkpoint_path, "Flow checkpoint path")->required();
    visualize->add_option("--out", heatmap_out, "Output CSV path");
    visualize->add_option("--xmin", grid.xmin);
    visualize->add_option("--xmax", grid.xmax);
    visualize->add_option("--ymin", grid.ymin);
    visualize->add_option("--ymax", grid.ymax);
    visualize->add_option("--steps", grid.steps_x, "Grid steps per axis (>= 50)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (run->parsed()) return run_command(config_path, overrides);
        if (compare->parsed()) return compare_command(config_path, overrides);
        grid.steps_y = grid.steps_x;
        return visualize_command(checkpoint_path, heatmap_out, grid);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const CatalogError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const FormatError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}
