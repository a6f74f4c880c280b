#include "frame_sampler/popgen.hpp"
#include "frame_sampler/sampler.hpp"
#include "frame_sampler/weights.hpp"

#include <benchmark/benchmark.h>

using namespace frame_sampler;

namespace {

PopulationFrame village(int households) {
    Rng rng(1);
    DemographyParams d;
    d.n_households = households;
    return generate_demography(d, rng);
}

void BM_SystematicWithin(benchmark::State &state) {
    const auto frame = village(static_cast<int>(state.range(0)));
    const GroupIndex index(frame, TargetGroup::under_50_all);
    Rng rng(2);
    const auto stage_i = srs_households(frame, frame.household_count() / 2, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(systematic_within(index, stage_i, 300, rng));
    }
}
BENCHMARK(BM_SystematicWithin)->Arg(200)->Arg(600)->Arg(2000);

void BM_StratifiedWithin(benchmark::State &state) {
    const auto frame = village(static_cast<int>(state.range(0)));
    const GroupIndex index(frame, TargetGroup::under_50_all);
    Rng rng(3);
    const auto stage_i = srs_households(frame, frame.household_count() / 2, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(stratified_within(index, stage_i, 300, rng));
    }
}
BENCHMARK(BM_StratifiedWithin)->Arg(200)->Arg(600)->Arg(2000);

void BM_PpsTwoStage(benchmark::State &state) {
    const auto frame = village(static_cast<int>(state.range(0)));
    const GroupIndex index(frame, TargetGroup::children_6_59m);
    const auto x = under50_size_measure(frame);
    Rng rng(4);
    for (auto _ : state) {
        const auto stage_i = ppswr_households(frame, 300, x, rng);
        benchmark::DoNotOptimize(pps_within(index, stage_i, 300, rng));
    }
}
BENCHMARK(BM_PpsTwoStage)->Arg(200)->Arg(600)->Arg(2000);

void BM_SrsInclusionMonteCarlo(benchmark::State &state) {
    const auto frame = village(600);
    const GroupIndex index(frame, TargetGroup::children_6_59m);
    Rng rng(5);
    for (auto _ : state) {
        benchmark::DoNotOptimize(srs_scheme_inclusion_all(index, 300, 300, WithinScheme::systematic,
                                                          static_cast<std::size_t>(state.range(0)), rng));
    }
}
BENCHMARK(BM_SrsInclusionMonteCarlo)->Arg(200)->Arg(2000)->Unit(benchmark::kMillisecond);

} // namespace
