#include "nofis/flow.hpp"

#include <stdexcept>
#include <string>

#include "nofis/math_util.hpp"

namespace nofis {

FlowModel make_flow(int dim, int layer_count, const std::vector<int>& hidden, Rng& rng,
                    double scale_clamp) {
    if (dim < 1) throw std::invalid_argument("make_flow: dim must be >= 1");
    if (layer_count < 0) throw std::invalid_argument("make_flow: negative layer count");
    FlowModel model;
    model.dim = dim;
    model.layers.reserve(layer_count);
    for (int i = 0; i < layer_count; ++i) {
        model.layers.push_back(make_coupling_layer(dim, i % 2 == 0, hidden, rng, scale_clamp));
    }
    return model;
}

FlowForwardResult flow_forward(const FlowModel& model, const Eigen::Ref<const Eigen::MatrixXd>& z0,
                               int upto, bool with_caches) {
    if (z0.rows() != model.dim) throw std::invalid_argument("flow_forward: dimension mismatch");
    if (upto < 0 || upto > model.layer_count()) {
        throw std::invalid_argument("flow_forward: layer count out of range");
    }
    FlowForwardResult result;
    result.z = z0;
    result.cum_logdet = Eigen::VectorXd::Zero(z0.cols());
    if (with_caches) result.caches.resize(upto);
    for (int i = 0; i < upto; ++i) {
        LayerResult step = layer_forward(model.layers[i], result.z,
                                         with_caches ? &result.caches[i] : nullptr, i);
        result.z = std::move(step.y);
        result.cum_logdet += step.logdet;
    }
    return result;
}

FlowSampleResult flow_sample(const FlowModel& model, Eigen::Index n, int upto, Rng& rng) {
    if (n < 1) throw std::invalid_argument("flow_sample: need at least one sample");
    FlowSampleResult result;
    result.z0.resize(model.dim, n);
    rng.fill_normal(result.z0);
    FlowForwardResult fwd = flow_forward(model, result.z0, upto);
    result.log_q = std_normal_logpdf_cols(result.z0) - fwd.cum_logdet;
    result.x = std::move(fwd.z);
    return result;
}

Eigen::VectorXd flow_logdensity(const FlowModel& model, const Eigen::Ref<const Eigen::MatrixXd>& x,
                                int upto) {
    if (x.rows() != model.dim) throw std::invalid_argument("flow_logdensity: dimension mismatch");
    if (upto < 0 || upto > model.layer_count()) {
        throw std::invalid_argument("flow_logdensity: layer count out of range");
    }
    Eigen::MatrixXd z = x;
    Eigen::VectorXd inv_logdet = Eigen::VectorXd::Zero(x.cols());
    for (int i = upto - 1; i >= 0; --i) {
        LayerResult step = layer_inverse(model.layers[i], z, i);
        z = std::move(step.y);
        inv_logdet += step.logdet;
    }
    return std_normal_logpdf_cols(z) + inv_logdet;
}

}  // namespace nofis
