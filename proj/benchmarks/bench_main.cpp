#include <benchmark/benchmark.h>

#include "photonstat/correlator.hpp"
#include "photonstat/fiber_optics.hpp"
#include "photonstat/fitters.hpp"
#include "photonstat/photon_sim.hpp"
#include "photonstat/presets.hpp"

using namespace photonstat;

namespace
{

// A fast-decaying cw emitter so each run yields plenty of events.
Scenario busy_cw(double duration)
{
    Scenario s = cw_dip_scenario(7, duration);
    s.sim.emitter.decay_rate = 1e-3;
    s.sim.background_rate = background_rate_for_rho(0.5 * mean_emission_rate(s.sim), s.rho);
    return s;
}

void BM_simulate_cw(benchmark::State &state)
{
    const Scenario s = busy_cw(static_cast<double>(state.range(0)));
    std::size_t events = 0;
    for (auto _ : state)
    {
        const auto streams = simulate_streams(s.sim);
        events = streams.first.times.size() + streams.second.times.size();
        benchmark::DoNotOptimize(streams.first.times.data());
    }
    state.counters["events"] = static_cast<double>(events);
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * events));
}
BENCHMARK(BM_simulate_cw)->Arg(1'000'000'000)->Arg(10'000'000'000)->Unit(benchmark::kMillisecond);

void BM_simulate_pulsed(benchmark::State &state)
{
    const Scenario s = pulse_train_scenario(7, 1e12);
    for (auto _ : state)
        benchmark::DoNotOptimize(simulate_streams(s.sim).first.times.data());
}
BENCHMARK(BM_simulate_pulsed)->Unit(benchmark::kMillisecond);

void BM_correlate(benchmark::State &state)
{
    const Scenario s = busy_cw(1e10);
    const auto streams = simulate_streams(s.sim);
    CorrelateOptions o = s.correlate;
    o.workers = static_cast<unsigned>(state.range(0));
    for (auto _ : state)
        benchmark::DoNotOptimize(cross_correlate(streams.first, streams.second, o).total_pairs);
    state.SetItemsProcessed(
        static_cast<std::int64_t>(state.iterations() * (streams.first.times.size() + streams.second.times.size())));
}
BENCHMARK(BM_correlate)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_fit_cw(benchmark::State &state)
{
    const Scenario s = busy_cw(1e10);
    const auto streams = simulate_streams(s.sim);
    const auto h = normalize_cw(cross_correlate(streams.first, streams.second, s.correlate));
    for (auto _ : state)
        benchmark::DoNotOptimize(fit_g2_cw(h).residual_norm);
}
BENCHMARK(BM_fit_cw)->Unit(benchmark::kMillisecond);

void BM_confinement_sweep(benchmark::State &state)
{
    for (auto _ : state)
        benchmark::DoNotOptimize(confinement_sweep(1.45, 0.0, 1.0, 1001).size());
}
BENCHMARK(BM_confinement_sweep);

} // namespace
BENCHMARK_MAIN();
