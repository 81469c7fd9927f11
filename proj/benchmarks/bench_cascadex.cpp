#include <benchmark/benchmark.h>

#include <memory>

#include "cascadex/cascade.hpp"
#include "cascadex/classifier.hpp"
#include "cascadex/metrics.hpp"
#include "cascadex/rng.hpp"
#include "cascadex/synthetic.hpp"
#include "oracles.hpp"

namespace {

using namespace cascadex;

std::vector<ScoredInstance> scored_set(std::size_t n) {
    Rng rng(n);
    std::vector<ScoredInstance> out;
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back({rng.uniform(), static_cast<int>(i % 4 == 0), 0, 0});
    }
    return out;
}

void BM_Dis(benchmark::State& state) {
    const auto scored = scored_set(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(dis(scored));
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Dis)->RangeMultiplier(4)->Range(256, 1 << 16)->Complexity(benchmark::oNLogN);

void BM_DisBruteForce(benchmark::State& state) {
    const auto scored = scored_set(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(oracle::dis_brute_force(scored));
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_DisBruteForce)->RangeMultiplier(4)->Range(256, 4096)->Complexity(benchmark::oNSquared);

void BM_Ece(benchmark::State& state) {
    const auto scored = scored_set(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(ece(scored));
    }
}
BENCHMARK(BM_Ece)->Arg(1 << 16);

struct CascadeFixture {
    Dataset data;
    Cascade cascade;

    static CascadeFixture make(std::size_t n) {
        synthetic::CurvedBoundarySpec spec;
        spec.size = n;
        spec.seed = 1;
        Dataset data = synthetic::curved_boundary(spec);
        Rng rng(2);
        auto small = std::make_shared<ClassifierModel>(ClassifierModel::initialized(Architecture::linear(), 2, 2, {}, rng));
        auto big = std::make_shared<ClassifierModel>(ClassifierModel::initialized(Architecture::mlp(64), 2, 2, {}, rng));
        return {std::move(data), Cascade::shared({{small, 2}, {big, 12}}, 0.52, 12)};
    }
};

void BM_RunCascade(benchmark::State& state) {
    const auto f = CascadeFixture::make(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(run_cascade(f.cascade, f.data));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RunCascade)->Arg(10000);

void BM_CalibrateThreshold(benchmark::State& state) {
    const auto f = CascadeFixture::make(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(calibrate_threshold(f.cascade, f.data, 1.2, 0.5));
    }
}
BENCHMARK(BM_CalibrateThreshold)->Arg(2000);

void BM_TrainEpoch(benchmark::State& state) {
    synthetic::HardSubpopulationSpec spec;
    spec.size = 1000;
    spec.noise_features = 10;
    Dataset data = synthetic::hard_subpopulation(spec);
    std::map<std::string, int> difficulty;
    for (const Instance& inst : data.instances()) {
        difficulty[inst.id] = inst.features[1] > 1.5 ? 1 : 0;
    }
    data = data.with_difficulty(difficulty);
    TrainConfig config;
    config.epochs = 1;
    config.lambda = static_cast<double>(state.range(0)) / 10.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(train(data, Architecture::mlp(32), config));
    }
    state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_TrainEpoch)->Arg(0)->Arg(5)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
