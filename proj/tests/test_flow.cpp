#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "nofis/errors.hpp"
#include "nofis/flow.hpp"
#include "nofis/math_util.hpp"

using namespace nofis;

namespace {

const std::vector<int> kSmallHidden = {8, 8};

/// Random layer whose subnetworks are not identity-initialized.
CouplingLayer random_layer(int dim, bool keep_first, Rng& rng, double weight_scale = 0.5) {
    CouplingLayer layer = make_coupling_layer(dim, keep_first, kSmallHidden, rng);
    auto scatter = [&](DenseNet& net) {
        for (auto& w : net.weights) {
            for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = rng.uniform(-weight_scale, weight_scale);
        }
        for (auto& b : net.biases) {
            for (Eigen::Index k = 0; k < b.size(); ++k) b(k) = rng.uniform(-weight_scale, weight_scale);
        }
    };
    scatter(layer.scale_net);
    scatter(layer.translate_net);
    return layer;
}

FlowModel random_flow(int dim, int layers, Rng& rng, double weight_scale = 0.5) {
    FlowModel model;
    model.dim = dim;
    for (int i = 0; i < layers; ++i) {
        model.layers.push_back(random_layer(dim, i % 2 == 0, rng, weight_scale));
    }
    return model;
}

/// Scale net squashed output for a constant raw value.
double clamped(double raw, double clamp) { return clamp * std::tanh(raw / clamp); }

}  // namespace

TEST_CASE("identity-initialized layer is exactly the identity map") {
    Rng rng(21);
    CouplingLayer layer = make_coupling_layer(4, true, kSmallHidden, rng);
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 9);
    const LayerResult fwd = layer_forward(layer, x);
    CHECK((fwd.y - x).cwiseAbs().maxCoeff() == 0.0);
    CHECK(fwd.logdet.cwiseAbs().maxCoeff() == 0.0);
    const LayerResult inv = layer_inverse(layer, x);
    CHECK((inv.y - x).cwiseAbs().maxCoeff() == 0.0);
    CHECK(inv.logdet.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("constant scale output gives logdet = c * changed_coords") {
    Rng rng(22);
    CouplingLayer layer = make_coupling_layer(5, true, kSmallHidden, rng);
    const double raw = 0.3;
    layer.scale_net.biases.back().setConstant(raw);
    const double c = clamped(raw, layer.scale_clamp);
    const int changed = layer.changed_size();
    CHECK(changed == 2);  // odd dim: extra coordinate passes through

    Eigen::MatrixXd x = Eigen::MatrixXd::Random(5, 4);
    const LayerResult fwd = layer_forward(layer, x);
    for (int n = 0; n < 4; ++n) {
        CHECK(fwd.logdet(n) == doctest::Approx(c * changed).epsilon(1e-12));
    }
    const LayerResult inv = layer_inverse(layer, x);
    for (int n = 0; n < 4; ++n) {
        CHECK(inv.logdet(n) == doctest::Approx(-c * changed).epsilon(1e-12));
    }
}

TEST_CASE("random layer roundtrips and logdets cancel") {
    Rng rng(23);
    for (int parity = 0; parity < 2; ++parity) {
        CouplingLayer layer = random_layer(3, parity == 0, rng);
        Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 50);
        const LayerResult fwd = layer_forward(layer, x);
        const LayerResult back = layer_inverse(layer, fwd.y);
        CHECK((back.y - x).cwiseAbs().maxCoeff() <= 1e-9);
        CHECK((fwd.logdet + back.logdet).cwiseAbs().maxCoeff() <= 1e-9);
    }
}

TEST_CASE("flow invertibility over 1000 random points") {
    Rng rng(24);
    FlowModel model = random_flow(4, 6, rng);
    Eigen::MatrixXd x(4, 1000);
    rng.fill_normal(x);
    FlowForwardResult fwd = flow_forward(model, x, model.layer_count());
    Eigen::MatrixXd z = fwd.z;
    Eigen::VectorXd inv_logdet = Eigen::VectorXd::Zero(1000);
    for (int i = model.layer_count() - 1; i >= 0; --i) {
        LayerResult step = layer_inverse(model.layers[i], z, i);
        z = std::move(step.y);
        inv_logdet += step.logdet;
    }
    CHECK((z - x).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK((fwd.cum_logdet + inv_logdet).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("flow_forward with zero layers is the identity") {
    Rng rng(25);
    FlowModel model = random_flow(3, 4, rng);
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 5);
    const FlowForwardResult fwd = flow_forward(model, x, 0);
    CHECK((fwd.z - x).cwiseAbs().maxCoeff() == 0.0);
    CHECK(fwd.cum_logdet.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("identity model passes samples through unchanged at any depth") {
    Rng rng(26);
    FlowModel model = make_flow(3, 8, kSmallHidden, rng);
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 5);
    for (int upto : {2, 5, 8}) {
        const FlowForwardResult fwd = flow_forward(model, x, upto);
        CHECK((fwd.z - x).cwiseAbs().maxCoeff() == 0.0);
        CHECK(fwd.cum_logdet.cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("forward-path density matches inverse-path density") {
    Rng rng(27);
    FlowModel model = random_flow(4, 5, rng);
    Eigen::MatrixXd z0(4, 40);
    rng.fill_normal(z0);
    const FlowForwardResult fwd = flow_forward(model, z0, model.layer_count());
    const Eigen::VectorXd log_q_forward = std_normal_logpdf_cols(z0) - fwd.cum_logdet;
    const Eigen::VectorXd log_q_inverse = flow_logdensity(model, fwd.z, model.layer_count());
    CHECK((log_q_forward - log_q_inverse).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("flow_sample from the identity model is standard normal") {
    Rng rng(28);
    FlowModel model = make_flow(2, 4, kSmallHidden, rng);
    const Eigen::Index n = 100000;
    const FlowSampleResult s = flow_sample(model, n, model.layer_count(), rng);
    const double bound = 4.0 / std::sqrt(static_cast<double>(n));
    CHECK(std::abs(s.x.row(0).mean()) <= bound);
    CHECK(std::abs(s.x.row(1).mean()) <= bound);
    // Reported log q must equal the base log density exactly.
    const Eigen::VectorXd base = std_normal_logpdf_cols(s.z0);
    CHECK((s.log_q - base).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sampled log q equals base log density minus the cumulative logdet") {
    Rng rng(29);
    FlowModel model = random_flow(3, 4, rng);
    const FlowSampleResult s = flow_sample(model, 64, model.layer_count(), rng);
    const FlowForwardResult fwd = flow_forward(model, s.z0, model.layer_count());
    const Eigen::VectorXd expected = std_normal_logpdf_cols(s.z0) - fwd.cum_logdet;
    CHECK((s.log_q - expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("identity model density equals the standard normal density") {
    Rng rng(30);
    FlowModel model = make_flow(2, 4, kSmallHidden, rng);
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(2, 10) * 3.0;
    const Eigen::VectorXd log_q = flow_logdensity(model, x, model.layer_count());
    const Eigen::VectorXd expected = std_normal_logpdf_cols(x);
    CHECK((log_q - expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("single constant-scale layer has a closed-form density") {
    Rng rng(31);
    FlowModel model;
    model.dim = 2;
    model.layers.push_back(make_coupling_layer(2, true, kSmallHidden, rng));
    CouplingLayer& layer = model.layers[0];
    const double raw_s = 0.4, t = 0.7;
    layer.scale_net.biases.back().setConstant(raw_s);
    layer.translate_net.biases.back().setConstant(t);
    const double s = clamped(raw_s, layer.scale_clamp);

    // y = (x1, x2 * e^s + t): q(y) = phi(y1) * phi((y2 - t) e^-s) * e^-s.
    Eigen::MatrixXd y(2, 3);
    y << 0.3, -1.2, 2.0, 0.9, 0.1, -0.4;
    const Eigen::VectorXd log_q = flow_logdensity(model, y, 1);
    for (int n = 0; n < 3; ++n) {
        const double y1 = y(0, n), y2 = y(1, n);
        const double z2 = (y2 - t) * std::exp(-s);
        const double expected =
            -0.5 * (y1 * y1 + z2 * z2) - kLog2Pi - s;
        CHECK(log_q(n) == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("2-D quadrature of a random flow density is normalized") {
    Rng rng(32);
    FlowModel model = random_flow(2, 4, rng, 0.4);
    const int steps = 320;
    const double lo = -8.0, hi = 8.0;
    const double h = (hi - lo) / steps;
    double mass = 0.0;
    Eigen::MatrixXd pts(2, steps);
    for (int i = 0; i < steps; ++i) {
        const double x = lo + (i + 0.5) * h;
        for (int j = 0; j < steps; ++j) pts.col(j) << x, lo + (j + 0.5) * h;
        mass += flow_logdensity(model, pts, model.layer_count()).array().exp().sum() * h * h;
    }
    CHECK(mass == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("one-dimensional flows use constant conditioners and stay invertible") {
    Rng rng(33);
    FlowModel model = make_flow(1, 4, kSmallHidden, rng);
    // Perturb the trainable halves: odd-parity layers transform coordinate 0.
    model.layers[1].scale_net.biases.back().setConstant(0.6);
    model.layers[1].translate_net.biases.back().setConstant(-0.25);
    model.layers[3].translate_net.biases.back().setConstant(0.5);
    Eigen::MatrixXd x(1, 200);
    rng.fill_normal(x);
    const FlowForwardResult fwd = flow_forward(model, x, 4);
    CHECK((fwd.z - x).cwiseAbs().maxCoeff() > 0.1);  // genuinely transformed
    Eigen::MatrixXd z = fwd.z;
    for (int i = 3; i >= 0; --i) z = layer_inverse(model.layers[i], z, i).y;
    CHECK((z - x).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("checkpoint roundtrip preserves parameters bit-exactly") {
    Rng rng(34);
    FlowModel model = random_flow(3, 4, rng);
    const std::string path = "checkpoint_roundtrip.bin";
    checkpoint_save(model, path);
    const FlowModel loaded = checkpoint_load(path);
    REQUIRE(loaded.layer_count() == model.layer_count());
    CHECK(loaded.dim == model.dim);
    for (int i = 0; i < model.layer_count(); ++i) {
        const auto& a = model.layers[i];
        const auto& b = loaded.layers[i];
        CHECK(a.keep_first == b.keep_first);
        for (std::size_t l = 0; l < a.scale_net.weights.size(); ++l) {
            CHECK((a.scale_net.weights[l] - b.scale_net.weights[l]).cwiseAbs().maxCoeff() == 0.0);
            CHECK((a.translate_net.weights[l] - b.translate_net.weights[l]).cwiseAbs().maxCoeff() ==
                  0.0);
            CHECK((a.scale_net.biases[l] - b.scale_net.biases[l]).cwiseAbs().maxCoeff() == 0.0);
            CHECK((a.translate_net.biases[l] - b.translate_net.biases[l]).cwiseAbs().maxCoeff() ==
                  0.0);
        }
    }
    std::filesystem::remove(path);
}

TEST_CASE("truncated checkpoints are rejected without a partial model") {
    Rng rng(35);
    FlowModel model = random_flow(2, 2, rng);
    const std::string path = "checkpoint_truncated.bin";
    checkpoint_save(model, path);
    const auto size = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, size / 2);
    CHECK_THROWS_AS(checkpoint_load(path), FormatError);
    std::filesystem::remove(path);
}

TEST_CASE("future checkpoint versions are rejected explicitly") {
    Rng rng(36);
    FlowModel model = random_flow(2, 2, rng);
    const std::string path = "checkpoint_future.bin";
    checkpoint_save(model, path);
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(5);
        f.put('2');  // pretend a later format revision wrote this
    }
    CHECK_THROWS_AS(checkpoint_load(path), UnsupportedVersionError);
    std::filesystem::remove(path);
}

TEST_CASE("corrupt magic is a format error") {
    const std::string path = "checkpoint_garbage.bin";
    {
        std::ofstream f(path, std::ios::binary);
        f << "not a checkpoint";
    }
    CHECK_THROWS_AS(checkpoint_load(path), FormatError);
    std::filesystem::remove(path);
}
