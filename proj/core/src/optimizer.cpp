#include "nofis/optimizer.hpp"

#include <cmath>
#include <stdexcept>

#include "nofis/errors.hpp"

namespace nofis {

OptimizerState OptimizerState::for_net(const DenseNet& net, const AdamConfig& config) {
    OptimizerState state;
    state.first_moment = GradientBundle::zeros_like(net);
    state.second_moment = GradientBundle::zeros_like(net);
    state.config = config;
    return state;
}

void optimizer_step(DenseNet& params, const GradientBundle& grads, OptimizerState& state) {
    if (params.weights.size() != grads.weight_grads.size() ||
        params.weights.size() != state.first_moment.weight_grads.size()) {
        throw std::invalid_argument("optimizer_step: shape mismatch between params, grads and state");
    }
    if (!grads.all_finite()) {
        throw TrainingDivergenceError("optimizer_step: non-finite gradient at step " +
                                          std::to_string(state.step + 1),
                                      state.step + 1);
    }
    state.step += 1;
    const AdamConfig& c = state.config;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));

    auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
        m = c.beta1 * m + (1.0 - c.beta1) * g;
        v.array() = c.beta2 * v.array() + (1.0 - c.beta2) * g.array().square();
        p.array() -= c.learning_rate * (m.array() / bc1) /
                     ((v.array() / bc2).sqrt() + c.epsilon);
    };

    for (std::size_t i = 0; i < params.weights.size(); ++i) {
        if (params.weights[i].rows() != grads.weight_grads[i].rows() ||
            params.weights[i].cols() != grads.weight_grads[i].cols()) {
            throw std::invalid_argument("optimizer_step: gradient shape mismatch at layer " +
                                        std::to_string(i));
        }
        update(params.weights[i], grads.weight_grads[i], state.first_moment.weight_grads[i],
               state.second_moment.weight_grads[i]);
        update(params.biases[i], grads.bias_grads[i], state.first_moment.bias_grads[i],
               state.second_moment.bias_grads[i]);
    }
}

}  // namespace nofis
