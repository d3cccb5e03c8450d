#pragma once

#include "nofis/dense_net.hpp"

namespace nofis {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adaptive-moment accumulators for one DenseNet.
struct OptimizerState {
    GradientBundle first_moment;
    GradientBundle second_moment;
    long long step = 0;
    AdamConfig config;

    static OptimizerState for_net(const DenseNet& net, const AdamConfig& config = {});
};

/// One bias-corrected adaptive-moment update, in place. Throws
/// TrainingDivergenceError (carrying the step index) on non-finite gradients.
void optimizer_step(DenseNet& params, const GradientBundle& grads, OptimizerState& state);

}  // namespace nofis
