#pragma once

#include <Eigen/Core>

#include <vector>

#include "nofis/rng.hpp"

namespace nofis {

/// Fully connected network with tanh hidden activations and a linear output
/// layer. Batches are stored column-wise: one sample per column.
struct DenseNet {
    std::vector<int> sizes;                 // input, hidden..., output widths
    std::vector<Eigen::MatrixXd> weights;   // weights[i]: sizes[i+1] x sizes[i]
    std::vector<Eigen::VectorXd> biases;    // biases[i]: sizes[i+1]

    int input_size() const { return sizes.front(); }
    int output_size() const { return sizes.back(); }
    int layer_count() const { return static_cast<int>(weights.size()); }
    long long parameter_count() const;
    bool all_finite() const;
};

/// All-zero parameters. The input width may be zero (the net then computes a
/// trainable constant); every other width must be positive.
DenseNet make_zero_net(std::vector<int> sizes);

/// Uniform fan-in init, U(-1/sqrt(fan_in), 1/sqrt(fan_in)), zero biases.
/// When `zero_last_layer` is set the final layer is zeroed so the net maps
/// everything to zero regardless of the earlier layers.
DenseNet make_random_net(std::vector<int> sizes, Rng& rng, bool zero_last_layer = false);

/// Post-activation values for every layer, input included. Sufficient to run
/// an exact backward pass.
struct ForwardCache {
    std::vector<Eigen::MatrixXd> activations;  // activations[0] = input, back() = output
};

/// Per-parameter gradient arrays, shape-matching a DenseNet.
struct GradientBundle {
    std::vector<Eigen::MatrixXd> weight_grads;
    std::vector<Eigen::VectorXd> bias_grads;

    static GradientBundle zeros_like(const DenseNet& net);
    void set_zero();
    void add_scaled(const GradientBundle& other, double scale);
    bool all_finite() const;
    double squared_norm() const;
};

/// Evaluates the net on a batch (columns are samples). Throws
/// std::invalid_argument on an input width mismatch.
Eigen::MatrixXd net_forward(const DenseNet& net, const Eigen::Ref<const Eigen::MatrixXd>& input,
                            ForwardCache* cache = nullptr);

/// Backpropagates `upstream` (gradient of some scalar objective with respect
/// to the net output) through a cached forward pass. Parameter gradients are
/// accumulated into `param_grads` when given; the return value is the
/// gradient with respect to the input batch. Throws std::logic_error when the
/// cache does not match the net or the upstream shape.
Eigen::MatrixXd net_backward(const DenseNet& net, const ForwardCache& cache,
                             const Eigen::Ref<const Eigen::MatrixXd>& upstream,
                             GradientBundle* param_grads = nullptr);

/// Central-difference gradients of sum(net(input)) with respect to every
/// parameter. Test oracle helper, O(parameter count) forward passes.
GradientBundle finite_difference_gradients(const DenseNet& net,
                                           const Eigen::Ref<const Eigen::MatrixXd>& input,
                                           double epsilon);

/// Worst relative disagreement between net_backward and central differences
/// for the scalar objective sum(net(input)). Denominator is floored at 1e-3
/// so near-zero gradients are compared absolutely. `epsilon` must lie in
/// (0, 1e-2].
double grad_check(const DenseNet& net, const Eigen::Ref<const Eigen::MatrixXd>& input,
                  double epsilon);

/// Worst relative disagreement between a given analytic bundle and central
/// differences; grad_check delegates here after running net_backward.
double compare_gradients(const GradientBundle& analytic, const GradientBundle& reference);

}  // namespace nofis
