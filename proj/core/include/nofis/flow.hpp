#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

#include "nofis/coupling.hpp"
#include "nofis/rng.hpp"

namespace nofis {

/// Stack of affine coupling layers over a standard-normal base distribution.
/// Layer parities alternate: even-indexed layers keep the first half of the
/// coordinates, odd-indexed layers the second half.
struct FlowModel {
    int dim = 0;
    std::vector<CouplingLayer> layers;

    int layer_count() const { return static_cast<int>(layers.size()); }
};

/// Identity-initialized model with `layer_count` coupling layers. Every layer
/// starts as the exact identity map, so the model density equals the base
/// density at construction.
FlowModel make_flow(int dim, int layer_count, const std::vector<int>& hidden, Rng& rng,
                    double scale_clamp = 5.0);

struct FlowForwardResult {
    Eigen::MatrixXd z;            // image of the batch under the first `upto` layers
    Eigen::VectorXd cum_logdet;   // per-sample sum of layer log|det J|
    std::vector<LayerCache> caches;  // only filled when requested
};

/// Pushes a batch through the first `upto` layers (0 <= upto <= layer_count).
/// With `with_caches` the per-layer caches needed for backpropagation are kept.
FlowForwardResult flow_forward(const FlowModel& model, const Eigen::Ref<const Eigen::MatrixXd>& z0,
                               int upto, bool with_caches = false);

struct FlowSampleResult {
    Eigen::MatrixXd z0;       // base draws
    Eigen::MatrixXd x;        // pushed-forward samples
    Eigen::VectorXd log_q;    // model log density at x, from the forward pass
};

/// Draws n base samples and pushes them through the first `upto` layers.
/// log_q = log p(z0) - cum_logdet; no inverse evaluation is needed.
FlowSampleResult flow_sample(const FlowModel& model, Eigen::Index n, int upto, Rng& rng);

/// Model log density at arbitrary points, via the analytic inverse of layers
/// upto..1. Columns are samples.
Eigen::VectorXd flow_logdensity(const FlowModel& model, const Eigen::Ref<const Eigen::MatrixXd>& x,
                                int upto);

/// Versioned binary checkpoint: magic "NOFIS1", then dimension, layer count,
/// per-net shapes and row-major 64-bit parameters.
void checkpoint_save(const FlowModel& model, const std::string& path);

/// Throws FormatError on corrupt/truncated files and UnsupportedVersionError
/// on checkpoints written by a newer format revision. Never returns a
/// partially loaded model.
FlowModel checkpoint_load(const std::string& path);

}  // namespace nofis
