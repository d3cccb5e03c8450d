#pragma once

#include <Eigen/Core>

#include <vector>

#include "nofis/estimate_report.hpp"
#include "nofis/problem.hpp"
#include "nofis/rng.hpp"

namespace nofis {

/// Plain Monte Carlo: hit fraction of n counted base draws.
EstimateReport mc_estimate(const Problem& problem, long long n, Rng& rng);

struct SusConfig {
    double p0 = 0.1;            // conditional level probability
    int n_level = 1000;         // samples per level
    double proposal_std = 1.0;  // component-wise random-walk step
    int max_levels = 20;

    void validate() const;
};

/// Subset simulation with adaptive thresholds at the p0 quantile of the bound
/// margin and component-wise Metropolis chains seeded from the elites. The
/// estimate is p0^(levels-1) times the final-level hit fraction. Calls per
/// extra level are exactly n_level - n_seed (seeds keep their known values).
/// Throws ConvergenceError when thresholds stagnate or max_levels is reached
/// without hitting the bound.
EstimateReport sus_estimate(const Problem& problem, const SusConfig& config, Rng& rng);

struct SssConfig {
    std::vector<double> scales = {1.5, 2.0, 2.5, 3.0};  // strictly increasing, all > 1
    long long n_per_scale = 10000;

    void validate() const;
};

/// Scaled-sigma sampling: Monte Carlo under N(0, s^2 I) per scale, then a
/// least-squares fit of log P(s) = alpha + beta*log(s) - gamma/s^2
/// extrapolated to s = 1. Throws ExtrapolationError when fewer than three
/// scales see any hit. Fit coefficients and residual norm land in `extras`.
EstimateReport sss_estimate(const Problem& problem, const SssConfig& config, Rng& rng);

struct AisConfig {
    int components = 2;
    double elite_fraction = 0.1;  // rho, in (0, 0.5]
    int iterations = 5;
    long long n_per_iter = 5000;
    long long final_n = 10000;
    double cov_floor = 1e-6;  // additive covariance smoothing

    void validate() const;
};

struct GaussianComponent {
    double weight = 1.0;
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

struct GaussianMixture {
    std::vector<GaussianComponent> components;

    Eigen::VectorXd logpdf(const Eigen::Ref<const Eigen::MatrixXd>& x) const;
    Eigen::MatrixXd sample(Eigen::Index n, Rng& rng) const;
};

struct AisRefitResult {
    GaussianMixture mixture;
    int degenerate_components = 0;  // components kept at their previous params
};

/// Likelihood-ratio-weighted moment matching of the mixture to the elite
/// samples. `elite_log_weights` are log(p/q_mix), self-normalized here.
/// Components whose responsibility mass vanishes or whose smoothed covariance
/// is unusable keep their previous parameters and are counted as degenerate.
AisRefitResult ais_refit(const GaussianMixture& current, const Eigen::Ref<const Eigen::MatrixXd>& elites,
                         const Eigen::Ref<const Eigen::VectorXd>& elite_log_weights,
                         double cov_floor);

/// Cross-entropy adaptive importance sampling with a Gaussian-mixture
/// proposal. Elite sets follow the rho quantile of the bound margin (or the
/// whole event once reached); the final mixture drives a standard IS
/// estimate. Exactly iterations * n_per_iter + final_n counted calls. Throws
/// ConvergenceError after three consecutive degenerate refits. `init` warm
/// starts the mixture; by default components start at unit covariance around
/// base draws.
EstimateReport adaptive_is_estimate(const Problem& problem, const AisConfig& config, Rng& rng,
                                    const GaussianMixture* init = nullptr);

}  // namespace nofis
