#include "nofis/coupling.hpp"

#include <stdexcept>
#include <string>

#include "nofis/errors.hpp"

namespace nofis {

namespace {

std::vector<int> subnet_sizes(int pass, int changed, const std::vector<int>& hidden) {
    std::vector<int> sizes;
    sizes.reserve(hidden.size() + 2);
    sizes.push_back(pass);
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(changed);
    return sizes;
}

void split_input(const CouplingLayer& layer, const Eigen::Ref<const Eigen::MatrixXd>& x,
                 Eigen::MatrixXd& pass, Eigen::MatrixXd& changed) {
    const int s = layer.split();
    if (layer.keep_first) {
        pass = x.topRows(s);
        changed = x.bottomRows(layer.dim - s);
    } else {
        pass = x.bottomRows(layer.dim - s);
        changed = x.topRows(s);
    }
}

Eigen::MatrixXd join_halves(const CouplingLayer& layer, const Eigen::MatrixXd& pass,
                            const Eigen::MatrixXd& changed) {
    Eigen::MatrixXd out(layer.dim, pass.cols());
    const int s = layer.split();
    if (layer.keep_first) {
        out.topRows(s) = pass;
        out.bottomRows(layer.dim - s) = changed;
    } else {
        out.bottomRows(layer.dim - s) = pass;
        out.topRows(s) = changed;
    }
    return out;
}

}  // namespace

CouplingLayer make_coupling_layer(int dim, bool keep_first, const std::vector<int>& hidden,
                                  Rng& rng, double scale_clamp) {
    if (dim < 1) throw std::invalid_argument("coupling layer needs dim >= 1");
    if (!(scale_clamp > 0.0)) throw std::invalid_argument("scale_clamp must be positive");
    CouplingLayer layer;
    layer.dim = dim;
    layer.keep_first = keep_first;
    layer.scale_clamp = scale_clamp;
    const auto sizes = subnet_sizes(layer.pass_size(), std::max(layer.changed_size(), 1), hidden);
    if (layer.changed_size() == 0) {
        // Degenerate split (D == 1, keep-first): the layer is the identity.
        layer.scale_net = make_zero_net(sizes);
        layer.translate_net = make_zero_net(sizes);
    } else {
        layer.scale_net = make_random_net(sizes, rng, /*zero_last_layer=*/true);
        layer.translate_net = make_random_net(sizes, rng, /*zero_last_layer=*/true);
    }
    return layer;
}

LayerGrads LayerGrads::zeros_like(const CouplingLayer& layer) {
    LayerGrads g;
    g.scale = GradientBundle::zeros_like(layer.scale_net);
    g.translate = GradientBundle::zeros_like(layer.translate_net);
    return g;
}

bool LayerGrads::all_finite() const { return scale.all_finite() && translate.all_finite(); }

LayerResult layer_forward(const CouplingLayer& layer, const Eigen::Ref<const Eigen::MatrixXd>& x,
                          LayerCache* cache, int layer_index) {
    if (x.rows() != layer.dim) throw std::invalid_argument("layer_forward: dimension mismatch");
    const Eigen::Index n = x.cols();
    if (layer.changed_size() == 0) {
        if (cache) *cache = LayerCache{};
        return {x, Eigen::VectorXd::Zero(n)};
    }

    Eigen::MatrixXd pass, changed;
    split_input(layer, x, pass, changed);

    LayerCache local;
    LayerCache* c = cache ? cache : &local;
    const Eigen::MatrixXd raw_s = net_forward(layer.scale_net, pass, &c->scale_cache);
    const Eigen::MatrixXd t = net_forward(layer.translate_net, pass, &c->translate_cache);

    const double clamp = layer.scale_clamp;
    Eigen::MatrixXd s = clamp * (raw_s.array() / clamp).tanh();
    Eigen::MatrixXd exp_s = s.array().exp();
    Eigen::MatrixXd y_changed = changed.cwiseProduct(exp_s) + t;

    LayerResult result;
    result.logdet = s.colwise().sum();
    result.y = join_halves(layer, pass, y_changed);
    if (!result.y.allFinite()) {
        throw NumericalOverflowError("coupling layer " + std::to_string(layer_index) +
                                         ": non-finite forward output",
                                     layer_index);
    }
    c->pass = std::move(pass);
    c->changed_in = std::move(changed);
    c->s = std::move(s);
    c->exp_s = std::move(exp_s);
    return result;
}

LayerResult layer_inverse(const CouplingLayer& layer, const Eigen::Ref<const Eigen::MatrixXd>& y,
                          int layer_index) {
    if (y.rows() != layer.dim) throw std::invalid_argument("layer_inverse: dimension mismatch");
    const Eigen::Index n = y.cols();
    if (layer.changed_size() == 0) return {y, Eigen::VectorXd::Zero(n)};

    Eigen::MatrixXd pass, changed;
    split_input(layer, y, pass, changed);

    const Eigen::MatrixXd raw_s = net_forward(layer.scale_net, pass);
    const Eigen::MatrixXd t = net_forward(layer.translate_net, pass);
    const double clamp = layer.scale_clamp;
    const Eigen::MatrixXd s = clamp * (raw_s.array() / clamp).tanh();
    const Eigen::MatrixXd x_changed = (changed - t).cwiseProduct((-s.array()).exp().matrix());

    LayerResult result;
    result.logdet = -s.colwise().sum();
    result.y = join_halves(layer, pass, x_changed);
    if (!result.y.allFinite()) {
        throw NumericalOverflowError("coupling layer " + std::to_string(layer_index) +
                                         ": non-finite inverse output",
                                     layer_index);
    }
    return result;
}

Eigen::MatrixXd layer_backward(const CouplingLayer& layer, const LayerCache& cache,
                               const Eigen::Ref<const Eigen::MatrixXd>& upstream,
                               const Eigen::Ref<const Eigen::VectorXd>& logdet_coeff,
                               LayerGrads* grads) {
    if (upstream.rows() != layer.dim) throw std::logic_error("layer_backward: upstream mismatch");
    if (layer.changed_size() == 0) return upstream;
    if (cache.s.rows() != layer.changed_size() || cache.s.cols() != upstream.cols() ||
        logdet_coeff.size() != upstream.cols()) {
        throw std::logic_error("layer_backward: cache does not match this layer and batch");
    }

    Eigen::MatrixXd up_pass, up_changed;
    {
        const int s = layer.split();
        if (layer.keep_first) {
            up_pass = upstream.topRows(s);
            up_changed = upstream.bottomRows(layer.dim - s);
        } else {
            up_pass = upstream.bottomRows(layer.dim - s);
            up_changed = upstream.topRows(s);
        }
    }

    // d/ds of [upstream . y + sum_n coeff_n * logdet_n]:
    //   y_chg = x_chg*exp(s) + t  -> up_chg .* x_chg .* exp(s), plus coeff per row.
    Eigen::MatrixXd s_grad = up_changed.cwiseProduct(cache.changed_in).cwiseProduct(cache.exp_s);
    s_grad.array().rowwise() += logdet_coeff.transpose().array();

    // Through the clamp squashing: ds/draw = 1 - (s/clamp)^2.
    const double clamp = layer.scale_clamp;
    Eigen::MatrixXd raw_grad =
        s_grad.array() * (1.0 - (cache.s.array() / clamp).square());

    GradientBundle* sg = grads ? &grads->scale : nullptr;
    GradientBundle* tg = grads ? &grads->translate : nullptr;
    const Eigen::MatrixXd pass_grad_s =
        net_backward(layer.scale_net, cache.scale_cache, raw_grad, sg);
    const Eigen::MatrixXd pass_grad_t =
        net_backward(layer.translate_net, cache.translate_cache, up_changed, tg);

    Eigen::MatrixXd x_pass_grad = up_pass + pass_grad_s + pass_grad_t;
    Eigen::MatrixXd x_changed_grad = up_changed.cwiseProduct(cache.exp_s);

    Eigen::MatrixXd out(layer.dim, upstream.cols());
    const int s = layer.split();
    if (layer.keep_first) {
        out.topRows(s) = x_pass_grad;
        out.bottomRows(layer.dim - s) = x_changed_grad;
    } else {
        out.bottomRows(layer.dim - s) = x_pass_grad;
        out.topRows(s) = x_changed_grad;
    }
    return out;
}

}  // namespace nofis
