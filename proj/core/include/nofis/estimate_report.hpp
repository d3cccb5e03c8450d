#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace nofis {

/// Importance-weight diagnostics over one sample batch.
struct WeightStats {
    double max_share = 0.0;           // largest normalized weight
    double effective_sample_size = 0.0;  // 1 / sum(normalized weight^2)
};

/// Per-training-step traces, one entry per epoch.
struct StepDiagnostics {
    std::vector<double> loss;
    std::vector<double> hit_fraction;  // fraction of batch inside the step's level set
    std::vector<double> mean_g;
};

/// Outcome of one estimator run: the probability estimate, exact call
/// accounting and method diagnostics. Fields that do not apply to a method
/// are left at their defaults.
struct EstimateReport {
    double p_est = 0.0;
    long long calls = 0;
    long long hits = 0;
    long long n_samples = 0;
    WeightStats weights;
    std::vector<StepDiagnostics> steps;
    bool zero_hit_warning = false;
    std::map<std::string, double> extras;  // method-specific scalars

    /// -inf when p_est == 0; flooring is applied only by the error metric.
    double log10_p() const { return std::log10(p_est); }
};

}  // namespace nofis
