#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "nofis/baselines.hpp"
#include "nofis/nofis.hpp"
#include "nofis/oracle.hpp"

namespace nofis {

struct McSpec {
    long long n = 10000;
};

struct SusSpec {
    SusConfig config;
};

struct SssSpec {
    SssConfig config;
};

struct AisSpec {
    AisConfig config;
};

struct ScheduleSpec {
    bool auto_pilot = false;
    long long pilot_n = 100000;      // counted pilot draws when auto
    std::vector<Bound> levels;       // explicit levels otherwise
};

struct NofisSpec {
    TrainConfig train;
    ScheduleSpec schedule;
    std::vector<int> hidden = {128, 128, 128};
    double scale_clamp = 5.0;
};

using MethodSpec = std::variant<NofisSpec, McSpec, SusSpec, SssSpec, AisSpec>;

std::string method_name(const MethodSpec& spec);

/// Exact call budget the method is allowed to consume; adaptive methods
/// declare their worst case.
long long declared_budget(const MethodSpec& spec);

/// Executes one estimator run against a (fresh) problem instance. For the
/// flow method the trained model is handed back through `trained` when given.
EstimateReport run_method(const MethodSpec& spec, const Problem& problem, Rng& rng,
                          FlowModel* trained = nullptr);

struct TrialResult {
    std::string method;
    std::string problem;
    std::uint64_t seed = 0;
    double p_est = 0.0;
    long long calls = 0;
    double log10_error = std::numeric_limits<double>::quiet_NaN();
    double wall_time_s = 0.0;
    std::string error;  // non-empty when the trial failed
    EstimateReport report;

    bool failed() const { return !error.empty(); }
};

/// Determinism contract: everything except wall time matches.
bool same_outcome(const TrialResult& a, const TrialResult& b);

struct AggregateReport {
    std::string method;
    std::string problem;
    Golden golden;
    std::vector<TrialResult> trials;
    double mean_log_error = std::numeric_limits<double>::quiet_NaN();
    double median_log_error = std::numeric_limits<double>::quiet_NaN();
    double std_log_error = std::numeric_limits<double>::quiet_NaN();
    double mean_calls = 0.0;
    int successes = 0;
    int failures = 0;
};

/// Runs `repeats` independent trials with seeds derived from base_seed, on a
/// fresh problem instance each. Per-trial errors are recorded without
/// aborting the batch; a budget overage fails loudly with
/// BudgetExceededError. Aggregate statistics cover the successful trials.
AggregateReport run_trials(const std::string& problem_name, const MethodSpec& spec, int repeats,
                           std::uint64_t base_seed, const Golden& golden);

/// Recomputes the aggregate statistics from the stored trial rows.
void recompute_aggregate(AggregateReport& agg);

nlohmann::json report_to_json(const EstimateReport& report);
nlohmann::json trial_to_json(const TrialResult& trial);
nlohmann::json aggregate_to_json(const AggregateReport& agg);

/// Full run report: config echo, per-trial rows, aggregate blocks and golden
/// provenance.
void write_run_report(const std::string& path, const nlohmann::json& config_echo,
                      const std::vector<AggregateReport>& aggregates);

}  // namespace nofis
