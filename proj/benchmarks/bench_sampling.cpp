#include <benchmark/benchmark.h>

#include "cfm/metrics.hpp"
#include "cfm/sampler.hpp"
#include "cfm/synthdata.hpp"

namespace {

cfm::VFConfig small_model() {
    cfm::VFConfig cfg;
    cfg.layers = 4;
    cfg.dim = 48;
    cfg.heads = 4;
    cfg.ffn_dim = 96;
    cfg.in_channels = 16;
    cfg.out_channels = 8;
    cfg.cond_dim = 6;
    return cfg;
}

void BM_SampleStage(benchmark::State& state) {
    auto model = cfm::init_vector_field<float>(small_model(), 3);
    cfm::PathParams path(1e-5);
    cfm::DataSpec spec;
    cfm::Rng rng(4);
    cfm::Example ex = cfm::gen_example(spec, 0, rng);
    cfm::MaskSpec mask = cfm::task_mask(cfm::MaskTask::TTM, 32);
    cfm::SolverConfig cfg{cfm::SolverMethod::Midpoint,
                          static_cast<int>(state.range(0)), 1.0};
    cfm::Tensor zeros = cfm::Tensor::zeros({32, 8});
    std::uint64_t seed = 0;
    for (auto _ : state) {
        auto r = cfm::sample_stage(model, ex.cond, zeros, mask, cfg, path, seed++);
        benchmark::DoNotOptimize(r.features.data());
    }
    state.counters["nfe"] = cfg.nfe();
}
BENCHMARK(BM_SampleStage)->Arg(2)->Arg(8)->Arg(32);

void BM_PooledFeatures(benchmark::State& state) {
    cfm::DataSpec spec;
    cfm::Rng rng(5);
    cfm::Example ex = cfm::gen_example(spec, 1, rng);
    for (auto _ : state) {
        auto v = cfm::pooled_features(ex.e);
        benchmark::DoNotOptimize(v.data());
    }
}
BENCHMARK(BM_PooledFeatures);

void BM_Frechet(benchmark::State& state) {
    cfm::DataSpec spec;
    auto set_a = cfm::gen_split(spec, 1, "bench-a", 96);
    auto set_b = cfm::gen_split(spec, 2, "bench-b", 96);
    std::vector<std::vector<double>> pa, pb;
    for (const auto& ex : set_a) pa.push_back(cfm::pooled_features(ex.e));
    for (const auto& ex : set_b) pb.push_back(cfm::pooled_features(ex.e));
    const auto ga = cfm::gaussian_stats(pa);
    const auto gb = cfm::gaussian_stats(pb);
    for (auto _ : state) {
        const double fd = cfm::frechet(ga, gb);
        benchmark::DoNotOptimize(fd);
    }
}
BENCHMARK(BM_Frechet);

}  // namespace

BENCHMARK_MAIN();
