#pragma once

#include <Eigen/Core>

#include <vector>

#include "nofis/dense_net.hpp"

namespace nofis {

/// Invertible affine coupling transform. One half of the coordinates passes
/// through unchanged and conditions an affine map of the other half:
///
///     y_pass = x_pass
///     y_chg  = x_chg .* exp(s(x_pass)) + t(x_pass)
///
/// Raw scale outputs are squashed to s = clamp * tanh(raw / clamp) so that
/// log|det J| = sum(s) stays bounded for any parameter values, keeping the
/// map bijective and numerically safe.
///
/// The pass-through half is the first ceil(D/2) coordinates when `keep_first`
/// is set, the remaining floor(D/2) otherwise; for odd D the extra coordinate
/// therefore sits in the pass-through half of keep-first layers.
struct CouplingLayer {
    int dim = 0;
    bool keep_first = true;
    double scale_clamp = 5.0;
    DenseNet scale_net;      // pass-through half -> changed half
    DenseNet translate_net;  // same shapes as scale_net

    int split() const { return (dim + 1) / 2; }
    int pass_size() const { return keep_first ? split() : dim - split(); }
    int changed_size() const { return dim - pass_size(); }
};

/// Identity-initialized layer: the final layer of both subnetworks is zero, so
/// the transform starts as the identity map exactly. `hidden` gives the
/// subnetwork hidden widths.
CouplingLayer make_coupling_layer(int dim, bool keep_first, const std::vector<int>& hidden,
                                  Rng& rng, double scale_clamp = 5.0);

/// Everything the backward pass needs from one forward evaluation.
struct LayerCache {
    Eigen::MatrixXd pass;        // pass-through half of the input
    Eigen::MatrixXd changed_in;  // changed half of the input
    Eigen::MatrixXd s;           // clamped scale outputs
    Eigen::MatrixXd exp_s;
    ForwardCache scale_cache;
    ForwardCache translate_cache;
};

struct LayerResult {
    Eigen::MatrixXd y;        // transformed batch, D x N
    Eigen::VectorXd logdet;   // per-sample log|det J|
};

/// Forward transform of a batch (columns are samples). Throws
/// NumericalOverflowError naming `layer_index` if the output is non-finite.
LayerResult layer_forward(const CouplingLayer& layer, const Eigen::Ref<const Eigen::MatrixXd>& x,
                          LayerCache* cache = nullptr, int layer_index = -1);

/// Exact analytic inverse; `logdet` is that of the inverse map (the negative
/// of the forward value at the matching point).
LayerResult layer_inverse(const CouplingLayer& layer, const Eigen::Ref<const Eigen::MatrixXd>& y,
                          int layer_index = -1);

/// Gradients of both subnetworks of one layer.
struct LayerGrads {
    GradientBundle scale;
    GradientBundle translate;

    static LayerGrads zeros_like(const CouplingLayer& layer);
    bool all_finite() const;
};

/// Backpropagates through one cached layer evaluation. `upstream` is the
/// gradient of the objective with respect to the layer output; the objective
/// additionally contains logdet_coeff[n] * logdet_n per sample. Parameter
/// gradients are accumulated into `grads` when given; returns the gradient
/// with respect to the layer input.
Eigen::MatrixXd layer_backward(const CouplingLayer& layer, const LayerCache& cache,
                               const Eigen::Ref<const Eigen::MatrixXd>& upstream,
                               const Eigen::Ref<const Eigen::VectorXd>& logdet_coeff,
                               LayerGrads* grads);

}  // namespace nofis
