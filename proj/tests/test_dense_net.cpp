#include <doctest.h>

#include <cmath>

#include "nofis/dense_net.hpp"
#include "nofis/errors.hpp"
#include "nofis/optimizer.hpp"

using namespace nofis;

TEST_CASE("zero network maps every input to zero") {
    DenseNet net = make_zero_net({3, 5, 2});
    Eigen::MatrixXd input = Eigen::MatrixXd::Random(3, 7);
    const Eigen::MatrixXd out = net_forward(net, input);
    CHECK(out.rows() == 2);
    CHECK(out.cols() == 7);
    CHECK(out.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("single linear layer with identity weight reproduces the input") {
    DenseNet net = make_zero_net({4, 4});
    net.weights[0] = Eigen::MatrixXd::Identity(4, 4);
    Eigen::MatrixXd input = Eigen::MatrixXd::Random(4, 3);
    CHECK((net_forward(net, input) - input).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("2-3-1 net matches a hand-evaluated tanh composition") {
    DenseNet net = make_zero_net({2, 3, 1});
    net.weights[0] << 0.1, -0.2, 0.3, 0.4, -0.5, 0.6;
    net.biases[0] << 0.01, -0.02, 0.03;
    net.weights[1] << 0.7, -0.8, 0.9;
    net.biases[1] << -0.1;

    Eigen::VectorXd x(2);
    x << 0.5, -0.3;

    // Independent inline evaluation of the same composition.
    const double h1 = std::tanh(0.1 * 0.5 + (-0.2) * (-0.3) + 0.01);
    const double h2 = std::tanh(0.3 * 0.5 + 0.4 * (-0.3) + (-0.02));
    const double h3 = std::tanh((-0.5) * 0.5 + 0.6 * (-0.3) + 0.03);
    const double expected = 0.7 * h1 + (-0.8) * h2 + 0.9 * h3 + (-0.1);

    const Eigen::MatrixXd out = net_forward(net, x);
    CHECK(out(0, 0) == doctest::Approx(expected).epsilon(1e-15));
    CHECK(out(0, 0) == doctest::Approx(-0.3663546903996318).epsilon(1e-12));
}

TEST_CASE("net_forward rejects inputs of the wrong width") {
    DenseNet net = make_zero_net({3, 2});
    Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(4, 1);
    CHECK_THROWS_AS(net_forward(net, bad), std::invalid_argument);
}

TEST_CASE("net_forward is deterministic") {
    Rng rng(7);
    DenseNet net = make_random_net({3, 8, 8, 2}, rng);
    Eigen::MatrixXd input = Eigen::MatrixXd::Random(3, 5);
    const Eigen::MatrixXd a = net_forward(net, input);
    const Eigen::MatrixXd b = net_forward(net, input);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("zero upstream gradient produces zero parameter gradients") {
    Rng rng(11);
    DenseNet net = make_random_net({2, 4, 3}, rng);
    Eigen::MatrixXd input = Eigen::MatrixXd::Random(2, 6);
    ForwardCache cache;
    net_forward(net, input, &cache);
    GradientBundle grads = GradientBundle::zeros_like(net);
    const Eigen::MatrixXd in_grad =
        net_backward(net, cache, Eigen::MatrixXd::Zero(3, 6), &grads);
    CHECK(in_grad.cwiseAbs().maxCoeff() == 0.0);
    CHECK(grads.squared_norm() == 0.0);
}

TEST_CASE("linear layer gradients: weights get the input, bias gets one") {
    DenseNet net = make_zero_net({3, 1});
    net.weights[0] << 0.5, -0.25, 1.5;
    Eigen::VectorXd x(3);
    x << 0.2, -0.7, 1.1;
    ForwardCache cache;
    net_forward(net, x, &cache);
    GradientBundle grads = GradientBundle::zeros_like(net);
    net_backward(net, cache, Eigen::MatrixXd::Ones(1, 1), &grads);
    CHECK((grads.weight_grads[0].transpose() - x).cwiseAbs().maxCoeff() == 0.0);
    CHECK(grads.bias_grads[0](0) == 1.0);
}

TEST_CASE("net_backward rejects stale caches") {
    Rng rng(3);
    DenseNet net = make_random_net({2, 4, 1}, rng);
    DenseNet other = make_random_net({2, 5, 1}, rng);
    Eigen::MatrixXd input = Eigen::MatrixXd::Random(2, 3);
    ForwardCache cache;
    net_forward(other, input, &cache);
    CHECK_THROWS_AS(net_backward(net, cache, Eigen::MatrixXd::Ones(1, 3), nullptr),
                    std::logic_error);

    ForwardCache good;
    net_forward(net, input, &good);
    CHECK_THROWS_AS(net_backward(net, good, Eigen::MatrixXd::Ones(1, 5), nullptr),
                    std::logic_error);
}

TEST_CASE("analytic gradients match central differences on random nets") {
    Rng rng(1234);
    for (int trial = 0; trial < 10; ++trial) {
        DenseNet net = make_random_net({3, 6, 5, 2}, rng);
        Eigen::MatrixXd input(3, 4);
        for (Eigen::Index k = 0; k < input.size(); ++k) input.data()[k] = rng.uniform(-1.5, 1.5);
        CHECK(grad_check(net, input, 1e-5) <= 1e-4);
    }
}

TEST_CASE("grad_check is exactly zero for the zero net") {
    DenseNet net = make_zero_net({2, 3, 1});
    Eigen::MatrixXd input = Eigen::MatrixXd::Random(2, 2);
    CHECK(grad_check(net, input, 1e-5) == 0.0);
}

TEST_CASE("grad_check validates its step size") {
    DenseNet net = make_zero_net({2, 2});
    Eigen::MatrixXd input = Eigen::MatrixXd::Zero(2, 1);
    CHECK_THROWS_AS(grad_check(net, input, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(grad_check(net, input, 0.5), std::invalid_argument);
}

TEST_CASE("a corrupted gradient bundle is flagged loudly") {
    Rng rng(99);
    DenseNet net = make_random_net({2, 5, 1}, rng);
    Eigen::MatrixXd input = Eigen::MatrixXd::Random(2, 3);
    ForwardCache cache;
    const Eigen::MatrixXd out = net_forward(net, input, &cache);
    GradientBundle analytic = GradientBundle::zeros_like(net);
    net_backward(net, cache, Eigen::MatrixXd::Ones(out.rows(), out.cols()), &analytic);
    analytic.weight_grads[0].array() += 1.0;  // deliberate corruption
    const GradientBundle fd = finite_difference_gradients(net, input, 1e-5);
    CHECK(compare_gradients(analytic, fd) > 1e-2);
}

TEST_CASE("adaptive-moment step with zero gradient leaves fresh parameters fixed") {
    Rng rng(5);
    DenseNet net = make_random_net({2, 3, 1}, rng);
    const DenseNet before = net;
    OptimizerState state = OptimizerState::for_net(net);
    optimizer_step(net, GradientBundle::zeros_like(net), state);
    CHECK(state.step == 1);
    for (std::size_t i = 0; i < net.weights.size(); ++i) {
        CHECK((net.weights[i] - before.weights[i]).cwiseAbs().maxCoeff() == 0.0);
        CHECK((net.biases[i] - before.biases[i]).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("constant gradient moves parameters against its sign") {
    DenseNet net = make_zero_net({1, 1});
    OptimizerState state = OptimizerState::for_net(net);
    GradientBundle grads = GradientBundle::zeros_like(net);
    grads.weight_grads[0](0, 0) = 0.75;
    grads.bias_grads[0](0) = -0.2;
    for (int i = 0; i < 50; ++i) optimizer_step(net, grads, state);
    CHECK(net.weights[0](0, 0) < 0.0);
    CHECK(net.biases[0](0) > 0.0);
}

TEST_CASE("first bias-corrected step has magnitude close to the step size") {
    DenseNet net = make_zero_net({1, 1});
    AdamConfig config;
    config.learning_rate = 1e-3;
    OptimizerState state = OptimizerState::for_net(net, config);
    GradientBundle grads = GradientBundle::zeros_like(net);
    grads.weight_grads[0](0, 0) = 0.5;
    optimizer_step(net, grads, state);
    // First update is lr * g / (|g| + eps), essentially lr * sign(g).
    CHECK(std::abs(net.weights[0](0, 0) + config.learning_rate) < 1e-8);
}

TEST_CASE("non-finite gradients raise a divergence error carrying the step") {
    DenseNet net = make_zero_net({1, 1});
    OptimizerState state = OptimizerState::for_net(net);
    GradientBundle grads = GradientBundle::zeros_like(net);
    grads.weight_grads[0](0, 0) = std::numeric_limits<double>::quiet_NaN();
    try {
        optimizer_step(net, grads, state);
        FAIL("expected TrainingDivergenceError");
    } catch (const TrainingDivergenceError& e) {
        CHECK(e.step_index() == 1);
    }
}
