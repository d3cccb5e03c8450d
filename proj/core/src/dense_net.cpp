#include "nofis/dense_net.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace nofis {

namespace {

void check_sizes(const std::vector<int>& sizes) {
    if (sizes.size() < 2) throw std::invalid_argument("dense net needs at least one layer");
    if (sizes.front() < 0) throw std::invalid_argument("negative input width");
    for (std::size_t i = 1; i < sizes.size(); ++i) {
        if (sizes[i] <= 0) throw std::invalid_argument("layer width must be positive");
    }
}

}  // namespace

long long DenseNet::parameter_count() const {
    long long n = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) n += weights[i].size() + biases[i].size();
    return n;
}

bool DenseNet::all_finite() const {
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (!weights[i].allFinite() || !biases[i].allFinite()) return false;
    }
    return true;
}

DenseNet make_zero_net(std::vector<int> sizes) {
    check_sizes(sizes);
    DenseNet net;
    net.sizes = std::move(sizes);
    const std::size_t layers = net.sizes.size() - 1;
    net.weights.reserve(layers);
    net.biases.reserve(layers);
    for (std::size_t i = 0; i < layers; ++i) {
        net.weights.push_back(Eigen::MatrixXd::Zero(net.sizes[i + 1], net.sizes[i]));
        net.biases.push_back(Eigen::VectorXd::Zero(net.sizes[i + 1]));
    }
    return net;
}

DenseNet make_random_net(std::vector<int> sizes, Rng& rng, bool zero_last_layer) {
    DenseNet net = make_zero_net(std::move(sizes));
    const std::size_t layers = net.weights.size();
    for (std::size_t i = 0; i < layers; ++i) {
        if (zero_last_layer && i == layers - 1) break;
        const int fan_in = net.sizes[i];
        const double bound = fan_in > 0 ? 1.0 / std::sqrt(static_cast<double>(fan_in)) : 1.0;
        for (Eigen::Index k = 0; k < net.weights[i].size(); ++k) {
            net.weights[i].data()[k] = rng.uniform(-bound, bound);
        }
    }
    return net;
}

GradientBundle GradientBundle::zeros_like(const DenseNet& net) {
    GradientBundle g;
    g.weight_grads.reserve(net.weights.size());
    g.bias_grads.reserve(net.biases.size());
    for (std::size_t i = 0; i < net.weights.size(); ++i) {
        g.weight_grads.push_back(Eigen::MatrixXd::Zero(net.weights[i].rows(), net.weights[i].cols()));
        g.bias_grads.push_back(Eigen::VectorXd::Zero(net.biases[i].size()));
    }
    return g;
}

void GradientBundle::set_zero() {
    for (auto& w : weight_grads) w.setZero();
    for (auto& b : bias_grads) b.setZero();
}

void GradientBundle::add_scaled(const GradientBundle& other, double scale) {
    for (std::size_t i = 0; i < weight_grads.size(); ++i) {
        weight_grads[i] += scale * other.weight_grads[i];
        bias_grads[i] += scale * other.bias_grads[i];
    }
}

bool GradientBundle::all_finite() const {
    for (std::size_t i = 0; i < weight_grads.size(); ++i) {
        if (!weight_grads[i].allFinite() || !bias_grads[i].allFinite()) return false;
    }
    return true;
}

double GradientBundle::squared_norm() const {
    double s = 0.0;
    for (std::size_t i = 0; i < weight_grads.size(); ++i) {
        s += weight_grads[i].squaredNorm() + bias_grads[i].squaredNorm();
    }
    return s;
}

Eigen::MatrixXd net_forward(const DenseNet& net, const Eigen::Ref<const Eigen::MatrixXd>& input,
                            ForwardCache* cache) {
    if (input.rows() != net.input_size()) {
        throw std::invalid_argument("net_forward: input has " + std::to_string(input.rows()) +
                                    " rows, net expects " + std::to_string(net.input_size()));
    }
    const int layers = net.layer_count();
    if (cache) {
        cache->activations.clear();
        cache->activations.reserve(layers + 1);
        cache->activations.push_back(input);
    }
    Eigen::MatrixXd a = input;
    for (int i = 0; i < layers; ++i) {
        Eigen::MatrixXd z = (net.weights[i] * a).colwise() + net.biases[i];
        if (i + 1 < layers) z = z.array().tanh();
        a = std::move(z);
        if (cache) cache->activations.push_back(a);
    }
    return a;
}

Eigen::MatrixXd net_backward(const DenseNet& net, const ForwardCache& cache,
                             const Eigen::Ref<const Eigen::MatrixXd>& upstream,
                             GradientBundle* param_grads) {
    const int layers = net.layer_count();
    if (static_cast<int>(cache.activations.size()) != layers + 1) {
        throw std::logic_error("net_backward: cache does not match net depth");
    }
    for (int i = 0; i <= layers; ++i) {
        if (cache.activations[i].rows() != net.sizes[i]) {
            throw std::logic_error("net_backward: cache width mismatch at layer " + std::to_string(i));
        }
    }
    const Eigen::Index batch = cache.activations[0].cols();
    if (upstream.rows() != net.output_size() || upstream.cols() != batch) {
        throw std::logic_error("net_backward: upstream shape does not match cached forward pass");
    }
    if (param_grads && param_grads->weight_grads.empty()) *param_grads = GradientBundle::zeros_like(net);

    Eigen::MatrixXd grad = upstream;  // gradient w.r.t. activation i+1
    for (int i = layers - 1; i >= 0; --i) {
        Eigen::MatrixXd delta;  // gradient w.r.t. pre-activation of layer i
        if (i == layers - 1) {
            delta = grad;
        } else {
            delta = grad.cwiseProduct(
                (1.0 - cache.activations[i + 1].array().square()).matrix());
        }
        if (param_grads) {
            param_grads->weight_grads[i].noalias() += delta * cache.activations[i].transpose();
            param_grads->bias_grads[i] += delta.rowwise().sum();
        }
        grad.noalias() = net.weights[i].transpose() * delta;
    }
    return grad;
}

GradientBundle finite_difference_gradients(const DenseNet& net,
                                           const Eigen::Ref<const Eigen::MatrixXd>& input,
                                           double epsilon) {
    DenseNet probe = net;
    GradientBundle fd = GradientBundle::zeros_like(net);
    auto value = [&]() { return net_forward(probe, input).sum(); };
    for (int i = 0; i < net.layer_count(); ++i) {
        for (Eigen::Index k = 0; k < net.weights[i].size(); ++k) {
            double& p = probe.weights[i].data()[k];
            const double saved = p;
            p = saved + epsilon;
            const double up = value();
            p = saved - epsilon;
            const double down = value();
            p = saved;
            fd.weight_grads[i].data()[k] = (up - down) / (2.0 * epsilon);
        }
        for (Eigen::Index k = 0; k < net.biases[i].size(); ++k) {
            double& p = probe.biases[i](k);
            const double saved = p;
            p = saved + epsilon;
            const double up = value();
            p = saved - epsilon;
            const double down = value();
            p = saved;
            fd.bias_grads[i](k) = (up - down) / (2.0 * epsilon);
        }
    }
    return fd;
}

double compare_gradients(const GradientBundle& analytic, const GradientBundle& reference) {
    double worst = 0.0;
    auto update = [&](double a, double b) {
        const double denom = std::max({std::abs(a), std::abs(b), 1e-3});
        worst = std::max(worst, std::abs(a - b) / denom);
    };
    for (std::size_t i = 0; i < analytic.weight_grads.size(); ++i) {
        for (Eigen::Index k = 0; k < analytic.weight_grads[i].size(); ++k) {
            update(analytic.weight_grads[i].data()[k], reference.weight_grads[i].data()[k]);
        }
        for (Eigen::Index k = 0; k < analytic.bias_grads[i].size(); ++k) {
            update(analytic.bias_grads[i](k), reference.bias_grads[i](k));
        }
    }
    return worst;
}

double grad_check(const DenseNet& net, const Eigen::Ref<const Eigen::MatrixXd>& input,
                  double epsilon) {
    if (!(epsilon > 0.0) || epsilon > 1e-2) {
        throw std::invalid_argument("grad_check: epsilon must lie in (0, 1e-2]");
    }
    ForwardCache cache;
    const Eigen::MatrixXd out = net_forward(net, input, &cache);
    GradientBundle analytic = GradientBundle::zeros_like(net);
    net_backward(net, cache, Eigen::MatrixXd::Ones(out.rows(), out.cols()), &analytic);
    const GradientBundle fd = finite_difference_gradients(net, input, epsilon);
    return compare_gradients(analytic, fd);
}

}  // namespace nofis
