#include <benchmark/benchmark.h>

#include "nofis/baselines.hpp"
#include "nofis/nofis.hpp"

using namespace nofis;

namespace {

const std::vector<int> kHidden = {128, 128, 128};

static void BM_NetForward(benchmark::State& state) {
    Rng rng(1);
    DenseNet net = make_random_net({static_cast<int>(state.range(0)), 128, 128, 128,
                                    static_cast<int>(state.range(0))},
                                   rng);
    Eigen::MatrixXd input = Eigen::MatrixXd::Random(state.range(0), 400);
    for (auto _ : state) {
        benchmark::DoNotOptimize(net_forward(net, input));
    }
    state.SetItemsProcessed(state.iterations() * 400);
}
BENCHMARK(BM_NetForward)->Arg(1)->Arg(5)->Arg(20);

static void BM_LayerForward(benchmark::State& state) {
    Rng rng(2);
    CouplingLayer layer = make_coupling_layer(static_cast<int>(state.range(0)), true, kHidden, rng);
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(state.range(0), 400);
    for (auto _ : state) {
        benchmark::DoNotOptimize(layer_forward(layer, x));
    }
    state.SetItemsProcessed(state.iterations() * 400);
}
BENCHMARK(BM_LayerForward)->Arg(2)->Arg(10)->Arg(40);

static void BM_FlowSample(benchmark::State& state) {
    Rng rng(3);
    FlowModel model = make_flow(2, static_cast<int>(state.range(0)), kHidden, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(flow_sample(model, 400, model.layer_count(), rng));
    }
    state.SetItemsProcessed(state.iterations() * 400);
}
BENCHMARK(BM_FlowSample)->Arg(8)->Arg(32);

static void BM_FlowLogDensity(benchmark::State& state) {
    Rng rng(4);
    FlowModel model = make_flow(2, static_cast<int>(state.range(0)), kHidden, rng);
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(2, 400);
    for (auto _ : state) {
        benchmark::DoNotOptimize(flow_logdensity(model, x, model.layer_count()));
    }
    state.SetItemsProcessed(state.iterations() * 400);
}
BENCHMARK(BM_FlowLogDensity)->Arg(8)->Arg(32);

static void BM_ReverseKlEpoch(benchmark::State& state) {
    Rng rng(5);
    Problem ring = make_problem("ring");
    const int steps = static_cast<int>(state.range(0));
    FlowModel model = make_flow(2, steps * 8, kHidden, rng);
    std::vector<double> margins;
    for (int m = steps - 1; m >= 0; --m) margins.push_back(m * 3.0);
    const ThresholdSchedule schedule = ThresholdSchedule::from_margins(margins, ring.bound());
    Eigen::MatrixXd z0(2, 400);
    rng.fill_normal(z0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            reverse_kl_loss(model, steps, ring, schedule, 10.0, z0, 8, true));
    }
    state.SetItemsProcessed(state.iterations() * 400);
}
BENCHMARK(BM_ReverseKlEpoch)->Arg(1)->Arg(4);

static void BM_McEstimate(benchmark::State& state) {
    Problem cube = make_problem("cube");
    Rng rng(6);
    for (auto _ : state) {
        benchmark::DoNotOptimize(mc_estimate(cube, state.range(0), rng));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_McEstimate)->Arg(10000);

static void BM_ProblemEval(benchmark::State& state) {
    Problem powell = make_problem("powell");
    Rng rng(7);
    Eigen::VectorXd x(40);
    rng.fill_normal(x);
    for (auto _ : state) {
        benchmark::DoNotOptimize(powell.eval_g(x));
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_ProblemEval);

}  // namespace

BENCHMARK_MAIN();
