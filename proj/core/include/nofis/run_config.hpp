#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nofis/harness.hpp"

namespace nofis {

/// Parsed and schema-validated experiment configuration. Validation happens
/// entirely before any characteristic-function call; unknown keys are
/// rejected with their field path.
struct RunConfig {
    std::string problem;
    int repeats = 1;
    std::uint64_t seed = 0;
    std::string out_dir;  // empty: resolved by the caller
    bool save_checkpoint = false;

    std::string golden_mode = "catalog";  // catalog | analytic | quadrature2d | mc
    long long golden_mc_n = 10000000;
    double golden_quad_step = 0.002;

    std::vector<std::pair<std::string, MethodSpec>> methods;
    nlohmann::json echo;  // raw config for byte-for-byte replay
};

/// Throws ConfigError (with the offending field path) on schema violations.
RunConfig parse_run_config(const nlohmann::json& j);

/// Reads and parses a config file; FormatError on I/O or JSON syntax trouble.
RunConfig load_run_config(const std::string& path);

/// Reference probability per the config's golden block. `cache`, when given,
/// persists oracle results.
Golden resolve_golden(const RunConfig& config, GoldenCache* cache = nullptr);

}  // namespace nofis
