#include "longtail/data.hpp"
#include "longtail/losses.hpp"
#include "longtail/rng.hpp"
#include "longtail/sampling.hpp"
#include "longtail/training.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace longtail;

SplitDatasets default_split()
{
    SyntheticSpec spec;
    spec.seed = 1;
    return generate_longtail(spec);
}

void BM_SamplerDraw(benchmark::State& state)
{
    const auto split = default_split();
    const EpochSampler sampler(split.train, SamplingStrategy::class_balanced(), 1);
    const auto probs = sampling_weights(split.train.class_counts(), 0.5);
    std::uint64_t stream = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(sampler.draw(probs, static_cast<std::size_t>(state.range(0)), ++stream));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SamplerDraw)->Arg(1 << 14)->Arg(1 << 20);

void BM_EpochStream(benchmark::State& state)
{
    const auto split = default_split();
    const auto kind = static_cast<SamplerKind>(state.range(0));
    const EpochSampler sampler(split.train, SamplingStrategy::from_kind(kind, 90), 1);
    int epoch = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(sampler.epoch(epoch));
        epoch = (epoch + 1) % 90;
    }
}
BENCHMARK(BM_EpochStream)->DenseRange(0, 3);

void BM_Loss(benchmark::State& state)
{
    const auto kind = static_cast<LossKind>(state.range(0));
    const std::vector<std::size_t> counts(50, 10);
    LossSpec spec;
    spec.kind = kind;
    const LossFunction loss(spec, counts);
    Rng rng(2);
    Vector z(50);
    for (auto& v : z) {
        v = rng.normal();
    }
    int label = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(loss(z, label));
        label = (label + 1) % 50;
    }
}
BENCHMARK(BM_Loss)->DenseRange(0, 2);

void BM_TrainEpoch(benchmark::State& state)
{
    const auto split = default_split();
    TrainConfig config;
    config.epochs = 1;
    for (auto _ : state) {
        benchmark::DoNotOptimize(train_head(split.train, config));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(split.train.size()));
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
