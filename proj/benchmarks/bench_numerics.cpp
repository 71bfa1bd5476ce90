#include <benchmark/benchmark.h>

#include "cfm/ops.hpp"
#include "cfm/rng.hpp"
#include "cfm/tape.hpp"
#include "cfm/trainer.hpp"
#include "cfm/vectorfield.hpp"

namespace {

cfm::Tensor random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
    cfm::Rng rng(seed);
    cfm::Tensor t({r, c});
    for (std::size_t i = 0; i < t.numel(); ++i) {
        t.at(i) = static_cast<float>(rng.uniform(-1.0, 1.0));
    }
    return t;
}

void BM_Matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    cfm::Tensor a = random_matrix(n, n, 1);
    cfm::Tensor b = random_matrix(n, n, 2);
    for (auto _ : state) {
        cfm::Tensor c = cfm::matmul(a, b);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(48)->Arg(128);

void BM_SoftmaxRows(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    cfm::Tensor x = random_matrix(n, n, 3);
    for (auto _ : state) {
        cfm::Tensor y = cfm::softmax_rows(x);
        benchmark::DoNotOptimize(y.data());
    }
}
BENCHMARK(BM_SoftmaxRows)->Arg(32)->Arg(128);

void BM_LayerNormRows(benchmark::State& state) {
    cfm::Tensor x = random_matrix(128, 48, 4);
    cfm::Tensor g = cfm::Tensor::full({48}, 1.0f);
    cfm::Tensor b = cfm::Tensor::full({48}, 0.0f);
    for (auto _ : state) {
        cfm::Tensor y = cfm::layer_norm_rows(x, g, b, 1e-5f);
        benchmark::DoNotOptimize(y.data());
    }
}
BENCHMARK(BM_LayerNormRows);

cfm::VFConfig stage1_like() {
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

void BM_VectorFieldForward(benchmark::State& state) {
    const auto L = static_cast<std::size_t>(state.range(0));
    auto model = cfm::init_vector_field<float>(stage1_like(), 7);
    cfm::Tensor x = random_matrix(L, 8, 5);
    cfm::Tensor ctx = random_matrix(L, 8, 6);
    cfm::Rng rng(8);
    cfm::Tensor toks({2, 6});
    for (std::size_t i = 0; i < toks.numel(); ++i) {
        toks.at(i) = static_cast<float>(rng.uniform(-1.0, 1.0));
    }
    cfm::CondTokensT<float> cond(toks);
    for (auto _ : state) {
        cfm::Tensor out = cfm::vf_apply(model, x, ctx, cond, 0.5f);
        benchmark::DoNotOptimize(out.data());
    }
}
BENCHMARK(BM_VectorFieldForward)->Arg(32)->Arg(128);

void BM_TrainStep(benchmark::State& state) {
    auto model = cfm::init_vector_field<float>(stage1_like(), 7);
    cfm::PathParams path(1e-5);
    cfm::TrainConfig tc;
    tc.lr_peak = 1e-3;
    tc.warmup_steps = 10;
    tc.total_steps = 1 << 30;
    tc.seed = 1;
    cfm::Trainer<float> trainer(model, tc, path);
    cfm::Rng rng(2);
    std::vector<cfm::BatchItem<float>> batch;
    for (int b = 0; b < 8; ++b) {
        cfm::BatchItem<float> item;
        item.x1 = random_matrix(32, 8, 100 + static_cast<std::uint64_t>(b));
        cfm::Tensor toks({2, 6});
        toks.at(0, static_cast<std::size_t>(b % 4)) = 1.0f;
        item.cond = cfm::CondTokensT<float>(std::move(toks));
        batch.push_back(std::move(item));
    }
    std::uint64_t step = 0;
    for (auto _ : state) {
        auto r = trainer.step(batch, step++);
        benchmark::DoNotOptimize(r.loss);
    }
}
BENCHMARK(BM_TrainStep);

}  // namespace

BENCHMARK_MAIN();
