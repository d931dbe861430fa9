// Serial reference kernels against their OpenMP counterparts.

#include "npl/quantile_net.hpp"
#include "npl/random.hpp"
#include "npl/simulation.hpp"

#include <benchmark/benchmark.h>

#include <cmath>

using namespace npl;

namespace {

Execution mode(const benchmark::State& state) { return state.range(0) == 0 ? Execution::serial : Execution::parallel; }

void BM_LossGradient(benchmark::State& state) {
    const auto tau = regular_tau_grid(99);
    const int width = 16, rows = 2000;
    auto p = init_params(width, default_hidden_sizes(Variant::CLNN2), tau, 1);
    for (double& b : p.layers.back().bias) b = 0.4;
    Stream rng(2, {});
    TrainingSet data;
    data.width = width;
    for (int i = 0; i < rows * width; ++i) data.features.push_back(rng.normal());
    for (int i = 0; i < rows; ++i) data.labels.push_back(rng.uniform() < 0.3 ? 0.0 : rng.uniform());
    for (auto _ : state) benchmark::DoNotOptimize(loss_and_gradient(p, data, mode(state)));
    state.SetItemsProcessed(state.iterations() * rows);
}

void BM_SimulatePortfolio(benchmark::State& state) {
    const auto tau = regular_tau_grid(99);
    std::vector<double> q(99);
    for (int k = 0; k < 99; ++k) q[static_cast<std::size_t>(k)] = k < 30 ? 0.0 : 0.9 * std::pow((k - 29) / 70.0, 1.5);
    const auto law = MarginalDistribution::build(q, tau);
    const std::size_t loans = 500;
    const std::vector<MarginalDistribution> marginals(loans, law);
    std::vector<CategoryId> cats(loans);
    for (std::size_t i = 0; i < loans; ++i) cats[i] = static_cast<CategoryId>(1 + i % 3);
    const std::vector<double> amounts(loans, 1000.0);
    const FactorParams params{1, 0.0, {0.3, 0.5, 0.7}};
    const SimulationOptions opts{1000, 3};
    for (auto _ : state) benchmark::DoNotOptimize(simulate_portfolio(marginals, cats, params, amounts, opts, mode(state)));
    state.SetItemsProcessed(state.iterations() * opts.n_sim);
}

} // namespace

BENCHMARK(BM_LossGradient)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SimulatePortfolio)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
