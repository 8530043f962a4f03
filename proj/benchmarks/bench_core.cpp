#include <benchmark/benchmark.h>

#include <numeric>
#include <vector>

#include "dynalloc/analytics.hpp"
#include "dynalloc/market_data.hpp"
#include "dynalloc/trainer.hpp"
#include "dynalloc/wealth_sim.hpp"

using namespace dynalloc;

namespace {

MarketModel two_asset() {
  MarketModel m;
  m.assets = {KouAssetParams{0.0045, 0.0130, 0.5106, 0.3958, 65.85, 57.75},
              KouAssetParams{0.0877, 0.1459, 0.3191, 0.2333, 4.3608, 5.504}};
  m.brownian_corr = {1.0, 0.08228, 0.08228, 1.0};
  m.labels = {"bond", "stock"};
  return m;
}

PolicyNetwork net_2x8() {
  return init_parameters(NetTopology{2, 2, 8, 2}, 1, FeatureScaling::for_horizon(5.0, 1000.0));
}

}  // namespace

static void BM_Forward(benchmark::State& state) {
  const auto net = net_2x8();
  std::vector<double> record(net.activation_size());
  double w = 1000.0;
  for (auto _ : state) {
    net.forward_into(2.5, w, record);
    benchmark::DoNotOptimize(record.data());
    w += 1e-3;
  }
}
BENCHMARK(BM_Forward);

static void BM_ForwardBackward(benchmark::State& state) {
  const auto net = net_2x8();
  std::vector<double> record(net.activation_size());
  std::vector<double> grad(net.parameter_count());
  std::vector<double> scratch(net.scratch_size());
  const double d_p[2] = {0.3, -0.1};
  for (auto _ : state) {
    net.forward_into(2.5, 1000.0, record);
    benchmark::DoNotOptimize(net.backward_into(record, d_p, grad, scratch));
  }
}
BENCHMARK(BM_ForwardBackward);

static void BM_SimulatePaths(benchmark::State& state) {
  const auto m = two_asset();
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(simulate_paths(m, n, 20, 0.25, 7).data().data());
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n) * 20);
}
BENCHMARK(BM_SimulatePaths)->Arg(10000)->Unit(benchmark::kMillisecond);

static void BM_RollForward(benchmark::State& state) {
  const auto paths = simulate_paths(two_asset(), 2000, 20, 0.25, 7);
  const auto net = net_2x8();
  const InvestmentHorizon h{5.0, 20, 1000.0, {}};
  std::vector<std::size_t> idx(2000);
  std::iota(idx.begin(), idx.end(), 0);
  for (auto _ : state) benchmark::DoNotOptimize(roll_forward(net, h, paths, idx, true).terminal_wealth.data());
  state.SetItemsProcessed(state.iterations() * 2000 * 20);
}
BENCHMARK(BM_RollForward)->Unit(benchmark::kMillisecond);

static void BM_TrainingStep(benchmark::State& state) {
  const auto paths = simulate_paths(two_asset(), 2000, 20, 0.25, 7);
  const auto net = net_2x8();
  const InvestmentHorizon h{5.0, 20, 1000.0, {}};
  std::vector<std::size_t> idx(2000);
  std::iota(idx.begin(), idx.end(), 0);
  const auto spec = ObjectiveSpec::mcv(1.0, 0.05);
  for (auto _ : state) benchmark::DoNotOptimize(batch_gradient(net, h, paths, idx, spec, 700.0).d_theta.data());
}
BENCHMARK(BM_TrainingStep)->Unit(benchmark::kMillisecond);

static void BM_ClosedFormDsq(benchmark::State& state) {
  MarketModel m;
  m.assets = {KouAssetParams{0.0043, 0.0, 0.0, 0.5, 3.0, 3.0},
              KouAssetParams{0.0877, 0.1459, 0.3191, 0.2333, 4.3608, 5.504}};
  m.risk_free = {true, false};
  m.labels = {"T30", "VWD"};
  const auto p = ClosedFormDsqParams::from_model(m, 138.33, 1.0, 100.0);
  for (auto _ : state) benchmark::DoNotOptimize(simulate_closed_form_dsq(p, m, 2000, 720, 3).data());
}
BENCHMARK(BM_ClosedFormDsq)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
