#include <benchmark/benchmark.h>

#include "ncask/channel_model.hpp"
#include "ncask/detector.hpp"
#include "ncask/optimizer.hpp"
#include "ncask/sep_analytics.hpp"
#include "ncask/series_cdf.hpp"

using namespace ncask;

namespace {

ChannelSpec spec(int n, CorrelationKind kind, double eps) {
    ChannelSpec s;
    s.n = n;
    s.sigma_h_sq = 1.0;
    s.sigma_n_sq = 1.0;
    s.model = {kind, eps};
    s.mean = make_mean_vector(n, 1.0, 1.0, {});
    return s;
}

void BM_SeriesHead(benchmark::State& state) {
    const int xi = static_cast<int>(state.range(0));
    QuadraticForm f{{0.4, 0.9, 1.7}, {0.3, 0.5, 0.2}, {2, 1, 1}};
    for (auto _ : state) benchmark::DoNotOptimize(evaluate_series(f, 1.3, xi, false).head);
    state.SetComplexityN(xi);
}
BENCHMARK(BM_SeriesHead)->RangeMultiplier(4)->Range(500, 32000)->Complexity();

void BM_SeriesReference(benchmark::State& state) {
    const int xi = static_cast<int>(state.range(0));
    QuadraticForm f{{0.4, 0.9, 1.7}, {0.3, 0.5, 0.2}, {2, 1, 1}};
    for (auto _ : state) benchmark::DoNotOptimize(evaluate_series_reference(f, 1.3, xi));
}
BENCHMARK(BM_SeriesReference)->Arg(500)->Arg(2000);

void BM_UnionBound(benchmark::State& state) {
    const int m = static_cast<int>(state.range(0));
    const auto eig = eigen_structure(spec(8, CorrelationKind::Exponential, 0.5));
    const auto snr = SnrProfile::from_gammas(Side::OneSided, equispaced_gammas(Side::OneSided, m, 100.0));
    for (auto _ : state) benchmark::DoNotOptimize(union_bound(snr, eig).value);
}
BENCHMARK(BM_UnionBound)->Arg(4)->Arg(8);

void BM_UnionBoundGradient(benchmark::State& state) {
    const auto eig = eigen_structure(spec(8, CorrelationKind::Uniform, 0.5));
    const auto snr = SnrProfile::from_gammas(Side::OneSided, equispaced_gammas(Side::OneSided, 4, 100.0));
    for (auto _ : state) benchmark::DoNotOptimize(union_bound_with_gradient(snr, eig, 2000).value);
}
BENCHMARK(BM_UnionBoundGradient);

void BM_Simulate(benchmark::State& state) {
    const auto s = spec(static_cast<int>(state.range(0)), CorrelationKind::Exponential, 0.5);
    const auto eig = eigen_structure(s);
    const auto c = equispaced_constellation(Side::OneSided, 4, 10.0);
    const auto ctx = DetectorContext::make(s, eig, c);
    SimulationOptions opts;
    opts.threads = 1;
    for (auto _ : state) benchmark::DoNotOptimize(simulate_sep(ctx, 1 << 14, 7, opts).sep_hat);
    state.SetItemsProcessed(state.iterations() * (1 << 14));
}
BENCHMARK(BM_Simulate)->Arg(4)->Arg(8);

}  // namespace
BENCHMARK_MAIN();
