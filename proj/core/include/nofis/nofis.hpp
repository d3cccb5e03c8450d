#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "nofis/estimate_report.hpp"
#include "nofis/flow.hpp"
#include "nofis/optimizer.hpp"
#include "nofis/problem.hpp"
#include "nofis/schedule.hpp"

namespace nofis {

enum class LossVariant {
    ReverseKl,  // default training loss
    ForwardKl,  // reweighted forward divergence, ablation only
};

enum class StageVariant {
    Staged,        // default: one level per step, earlier layers frozen per `freeze`
    TerminalOnly,  // ablation: single loss at the last level, all layers trained
    MeanOfKls,     // ablation: mean of all per-level losses, all layers trained
};

struct TrainConfig {
    int steps = 4;               // M
    int layers_per_step = 8;     // K
    int epochs = 20;             // E, one parameter update per epoch
    int batch_size = 400;        // N
    double temperature = 10.0;   // tau
    long long n_is = 50;
    bool freeze = true;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    LossVariant loss = LossVariant::ReverseKl;
    StageVariant stages = StageVariant::Staged;

    void validate() const;  // throws std::invalid_argument
};

/// Unnormalized log density of the tempered target at level `level`:
/// min(tau*(upper - gval), tau*(gval - lower), 0) + log p(x), with infinite
/// bound sides dropping out of the min. `gval` must be g(x), already
/// evaluated; no call is made here. Throws std::invalid_argument for tau <= 0.
double tempered_logdensity(const Bound& level, double tau,
                           const Eigen::Ref<const Eigen::VectorXd>& x, double gval);

/// Monotone decreasing penalty exponent alone (no base log density).
double tempered_exponent(const Bound& level, double tau, double gval);

struct LossResult {
    double loss = 0.0;
    int first_trainable = 0;              // layer index the gradients start at
    std::vector<LayerGrads> layer_grads;  // one entry per layer >= first_trainable
    double mean_hit_fraction = 0.0;       // batch fraction inside the level set
    double mean_g = 0.0;
};

/// Empirical divergence loss for training step m (1-based) and its parameter
/// gradients. The batch z0 is drawn from the base distribution by the caller;
/// exactly batch-size counted g calls are made. With `freeze`, gradients
/// cover only the K layers belonging to step m. Throws
/// TrainingDivergenceError when the loss is non-finite.
LossResult reverse_kl_loss(const FlowModel& model, int m, const Problem& problem,
                           const ThresholdSchedule& schedule, double tau,
                           const Eigen::Ref<const Eigen::MatrixXd>& z0, int layers_per_step,
                           bool freeze);

/// Self-normalized reweighted estimate of the forward divergence and its
/// gradients; ablation path only.
LossResult forward_kl_loss(const FlowModel& model, int m, const Problem& problem,
                           const ThresholdSchedule& schedule, double tau,
                           const Eigen::Ref<const Eigen::MatrixXd>& z0, int layers_per_step,
                           bool freeze);

struct TrainResult {
    std::vector<StepDiagnostics> steps;
};

/// Staged training loop. Fresh base samples are drawn every epoch, so the
/// counted training budget is exactly steps * epochs * batch_size with
/// analytic gradients. The model must have steps * layers_per_step layers and
/// the schedule length must equal `steps`. On divergence a
/// TrainingDivergenceError is thrown after the partial diagnostics are moved
/// into `partial` (when given).
TrainResult train(FlowModel& model, const Problem& problem, const ThresholdSchedule& schedule,
                  const TrainConfig& config, Rng& rng, TrainResult* partial = nullptr);

/// Final importance-sampling estimate with the trained model as proposal.
/// Weights come from the forward pass only; each sample costs one counted g
/// call. An all-miss batch yields a valid report with p_est = 0 and
/// zero_hit_warning set.
EstimateReport importance_estimate(const FlowModel& model, const Problem& problem, long long n_is,
                                   Rng& rng);

/// Smallest temperature separating an inside point from an outside point at
/// the given level: ln(p(x_out-ish)/p(x_in)) / margin_excess. Non-positive
/// bounds collapse to 0 (any positive temperature works for that pair). Two
/// counted g calls unless both g values are supplied. Throws
/// std::invalid_argument when x_in is not inside or x_out not outside.
double temperature_lower_bound(const Problem& problem, const Bound& level,
                               const Eigen::Ref<const Eigen::VectorXd>& x_in,
                               const Eigen::Ref<const Eigen::VectorXd>& x_out,
                               std::optional<double> g_in = std::nullopt,
                               std::optional<double> g_out = std::nullopt);

}  // namespace nofis
