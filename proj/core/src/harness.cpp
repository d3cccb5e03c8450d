#include "nofis/harness.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "nofis/errors.hpp"
#include "nofis/math_util.hpp"

namespace nofis {

std::string method_name(const MethodSpec& spec) {
    struct Visitor {
        std::string operator()(const NofisSpec&) const { return "nofis"; }
        std::string operator()(const McSpec&) const { return "mc"; }
        std::string operator()(const SusSpec&) const { return "sus"; }
        std::string operator()(const SssSpec&) const { return "sss"; }
        std::string operator()(const AisSpec&) const { return "ais"; }
    };
    return std::visit(Visitor{}, spec);
}

long long declared_budget(const MethodSpec& spec) {
    struct Visitor {
        long long operator()(const NofisSpec& s) const {
            const auto& t = s.train;
            long long budget = static_cast<long long>(t.steps) * t.epochs * t.batch_size + t.n_is;
            if (s.schedule.auto_pilot) budget += s.schedule.pilot_n;
            return budget;
        }
        long long operator()(const McSpec& s) const { return s.n; }
        long long operator()(const SusSpec& s) const {
            const auto& c = s.config;
            const long long seeds = std::llround(c.p0 * c.n_level);
            return c.n_level + static_cast<long long>(c.max_levels - 1) * (c.n_level - seeds);
        }
        long long operator()(const SssSpec& s) const {
            return static_cast<long long>(s.config.scales.size()) * s.config.n_per_scale;
        }
        long long operator()(const AisSpec& s) const {
            return static_cast<long long>(s.config.iterations) * s.config.n_per_iter +
                   s.config.final_n;
        }
    };
    return std::visit(Visitor{}, spec);
}

EstimateReport run_method(const MethodSpec& spec, const Problem& problem, Rng& rng,
                          FlowModel* trained) {
    struct Visitor {
        const Problem& problem;
        Rng& rng;
        FlowModel* trained;

        EstimateReport operator()(const NofisSpec& s) const {
            const ThresholdSchedule schedule =
                s.schedule.auto_pilot
                    ? suggest_schedule(problem, s.train.steps, s.schedule.pilot_n, rng)
                    : ThresholdSchedule::from_bounds(s.schedule.levels);
            FlowModel model = make_flow(problem.dim(), s.train.steps * s.train.layers_per_step,
                                        s.hidden, rng, s.scale_clamp);
            TrainResult tr = train(model, problem, schedule, s.train, rng);
            EstimateReport report = importance_estimate(model, problem, s.train.n_is, rng);
            report.steps = std::move(tr.steps);
            if (trained) *trained = std::move(model);
            return report;
        }
        EstimateReport operator()(const McSpec& s) const {
            return mc_estimate(problem, s.n, rng);
        }
        EstimateReport operator()(const SusSpec& s) const {
            return sus_estimate(problem, s.config, rng);
        }
        EstimateReport operator()(const SssSpec& s) const {
            return sss_estimate(problem, s.config, rng);
        }
        EstimateReport operator()(const AisSpec& s) const {
            return adaptive_is_estimate(problem, s.config, rng);
        }
    };
    return std::visit(Visitor{problem, rng, trained}, spec);
}

bool same_outcome(const TrialResult& a, const TrialResult& b) {
    return a.method == b.method && a.problem == b.problem && a.seed == b.seed &&
           a.p_est == b.p_est && a.calls == b.calls && a.error == b.error &&
           ((std::isnan(a.log10_error) && std::isnan(b.log10_error)) ||
            a.log10_error == b.log10_error);
}

void recompute_aggregate(AggregateReport& agg) {
    std::vector<double> errors;
    double calls = 0.0;
    agg.successes = 0;
    agg.failures = 0;
    for (const TrialResult& t : agg.trials) {
        if (t.failed()) {
            ++agg.failures;
            continue;
        }
        ++agg.successes;
        errors.push_back(t.log10_error);
        calls += static_cast<double>(t.calls);
    }
    if (agg.successes > 0) {
        agg.mean_log_error = mean(errors);
        agg.median_log_error = median(errors);
        agg.std_log_error = stddev(errors);
        agg.mean_calls = calls / agg.successes;
    }
}

AggregateReport run_trials(const std::string& problem_name, const MethodSpec& spec, int repeats,
                           std::uint64_t base_seed, const Golden& golden) {
    if (repeats < 1) throw std::invalid_argument("run_trials: repeats must be >= 1");
    AggregateReport agg;
    agg.method = method_name(spec);
    agg.problem = problem_name;
    agg.golden = golden;
    agg.trials.reserve(repeats);

    const long long budget = declared_budget(spec);
    for (int r = 0; r < repeats; ++r) {
        TrialResult trial;
        trial.method = agg.method;
        trial.problem = problem_name;
        trial.seed = derive_seed(base_seed, static_cast<std::uint64_t>(r));
        const Problem problem = make_problem(problem_name);
        Rng rng(trial.seed);
        const auto t0 = std::chrono::steady_clock::now();
        try {
            trial.report = run_method(spec, problem, rng);
            trial.p_est = trial.report.p_est;
            trial.calls = problem.calls();
            trial.report.calls = trial.calls;
            if (trial.calls > budget) {
                throw BudgetExceededError("trial " + std::to_string(r) + " of " + agg.method +
                                              " on " + problem_name + " exceeded its declared budget of " +
                                              std::to_string(budget) + " calls by " +
                                              std::to_string(trial.calls - budget),
                                          budget, trial.calls);
            }
            trial.log10_error = log_error(trial.p_est, golden.value);
        } catch (const BudgetExceededError&) {
            throw;  // implementation defect, not a stochastic failure
        } catch (const std::exception& e) {
            trial.error = e.what();
            trial.calls = problem.calls();
        }
        trial.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        agg.trials.push_back(std::move(trial));
    }
    recompute_aggregate(agg);
    return agg;
}

namespace {

nlohmann::json finite_or_null(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

}  // namespace

nlohmann::json report_to_json(const EstimateReport& report) {
    nlohmann::json j{
        {"p_est", report.p_est},
        {"log10_p_est", report.p_est > 0.0 ? nlohmann::json(report.log10_p()) : nullptr},
        {"calls", report.calls},
        {"hits", report.hits},
        {"n_samples", report.n_samples},
        {"zero_hit_warning", report.zero_hit_warning},
    };
    if (report.weights.effective_sample_size > 0.0) {
        j["weights"] = {{"max_share", report.weights.max_share},
                        {"effective_sample_size", report.weights.effective_sample_size}};
    }
    if (!report.steps.empty()) {
        nlohmann::json steps = nlohmann::json::array();
        for (const StepDiagnostics& s : report.steps) {
            steps.push_back({{"loss", s.loss},
                             {"hit_fraction", s.hit_fraction},
                             {"mean_g", s.mean_g}});
        }
        j["steps"] = std::move(steps);
    }
    if (!report.extras.empty()) j["extras"] = report.extras;
    return j;
}

nlohmann::json trial_to_json(const TrialResult& trial) {
    return nlohmann::json{
        {"method", trial.method},
        {"problem", trial.problem},
        {"seed", trial.seed},
        {"p_est", trial.p_est},
        {"calls", trial.calls},
        {"log10_error", finite_or_null(trial.log10_error)},
        {"wall_time_s", trial.wall_time_s},
        {"error", trial.error.empty() ? nlohmann::json(nullptr) : nlohmann::json(trial.error)},
        {"report", report_to_json(trial.report)},
    };
}

nlohmann::json aggregate_to_json(const AggregateReport& agg) {
    nlohmann::json trials = nlohmann::json::array();
    for (const TrialResult& t : agg.trials) trials.push_back(trial_to_json(t));
    return nlohmann::json{
        {"method", agg.method},
        {"problem", agg.problem},
        {"golden", {{"value", agg.golden.value}, {"provenance", agg.golden.provenance}}},
        {"aggregate",
         {{"mean_log_error", finite_or_null(agg.mean_log_error)},
          {"median_log_error", finite_or_null(agg.median_log_error)},
          {"std_log_error", finite_or_null(agg.std_log_error)},
          {"mean_calls", agg.mean_calls},
          {"successes", agg.successes},
          {"failures", agg.failures}}},
        {"trials", std::move(trials)},
    };
}

void write_run_report(const std::string& path, const nlohmann::json& config_echo,
                      const std::vector<AggregateReport>& aggregates) {
    nlohmann::json methods = nlohmann::json::array();
    for (const AggregateReport& agg : aggregates) methods.push_back(aggregate_to_json(agg));
    const nlohmann::json j{{"config", config_echo}, {"results", std::move(methods)}};
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("report: cannot write " + path);
    out << j.dump(2) << "\n";
    if (!out) throw FormatError("report: write failed for " + path);
}

}  // namespace nofis
