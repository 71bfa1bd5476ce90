#include <doctest.h>

#include <cmath>

#include "cfm/sampler.hpp"
#include "test_support.hpp"

using namespace cfm;

TEST_CASE("cfg_field identities and hand value") {
    Rng rng(2);
    Tensor64 vc = cfm::test::random_tensor({4, 3}, rng);
    Tensor64 vu = cfm::test::random_tensor({4, 3}, rng);

    Tensor64 a0 = cfg_field(vc, vu, 0.0);
    for (std::size_t i = 0; i < vc.numel(); ++i) CHECK(a0.at(i) == vc.at(i));

    for (double alpha : {0.0, 0.5, 1.0, 3.0}) {
        Tensor64 fixed = cfg_field(vc, vc, alpha);
        for (std::size_t i = 0; i < vc.numel(); ++i) CHECK(fixed.at(i) == vc.at(i));
    }

    Tensor64 two = Tensor64::scalar(2.0);
    Tensor64 one = Tensor64::scalar(1.0);
    CHECK(cfg_field(two, one, 1.0).at(0) == doctest::Approx(3.0));

    // affine in alpha
    Tensor64 g1 = cfg_field(vc, vu, 0.5);
    Tensor64 g2 = cfg_field(vc, vu, 1.0);
    Tensor64 g3 = cfg_field(vc, vu, 1.5);
    for (std::size_t i = 0; i < vc.numel(); ++i) {
        CHECK(g1.at(i) + g3.at(i) == doctest::Approx(2.0 * g2.at(i)).epsilon(1e-12));
    }

    Tensor64 bad({2, 2});
    CHECK_THROWS_AS(cfg_field(vc, bad, 1.0), ShapeError);
}

TEST_CASE("integrate: constant field, exponential, accounting, abort") {
    SUBCASE("constant field lands on x0 + c for every method") {
        for (auto method : {SolverMethod::Euler, SolverMethod::Midpoint}) {
            for (int steps : {1, 8, 32}) {
                SolverConfig cfg{method, steps, 0.0};
                auto field = [](const Tensor64& x, double) {
                    return Tensor64::full(x.shape(), 0.5);
                };
                auto r = integrate(field, Tensor64::full({2, 2}, 1.0), cfg);
                for (std::size_t i = 0; i < r.state.numel(); ++i) {
                    CHECK(r.state.at(i) == 1.5);  // dyadic values stay exact
                }
            }
        }
    }

    SUBCASE("f(x) = x reaches e with midpoint at 256 steps") {
        SolverConfig cfg{SolverMethod::Midpoint, 256, 0.0};
        auto field = [](const Tensor64& x, double) { return x; };
        auto r = integrate(field, Tensor64::scalar(1.0), cfg);
        CHECK(std::fabs(r.state.at(0) - std::exp(1.0)) <= 1e-4);
    }

    SUBCASE("field evaluation counts") {
        auto field = [](const Tensor64& x, double) { return x; };
        auto re = integrate(field, Tensor64::scalar(1.0), SolverConfig{SolverMethod::Euler, 7, 0.0});
        CHECK(re.field_evals == 7);
        auto rm = integrate(field, Tensor64::scalar(1.0), SolverConfig{SolverMethod::Midpoint, 7, 0.0});
        CHECK(rm.field_evals == 14);
    }

    SUBCASE("non-finite state aborts with the step index") {
        auto field = [](const Tensor64& x, double) {
            return Tensor64::full(x.shape(), std::numeric_limits<double>::infinity());
        };
        CHECK_THROWS_AS(
            integrate(field, Tensor64::scalar(1.0), SolverConfig{SolverMethod::Euler, 4, 0.0}),
            NumericalError);
    }
}

TEST_CASE("solver order on f(x) = x") {
    auto field = [](const Tensor64& x, double) { return x; };
    auto err_at = [&](SolverMethod m, int steps) {
        auto r = integrate(field, Tensor64::scalar(1.0), SolverConfig{m, steps, 0.0});
        return std::fabs(r.state.at(0) - std::exp(1.0));
    };
    const double e8 = err_at(SolverMethod::Euler, 8);
    const double e16 = err_at(SolverMethod::Euler, 16);
    const double e32 = err_at(SolverMethod::Euler, 32);
    CHECK(e8 / e16 >= 1.8);
    CHECK(e8 / e16 <= 2.2);
    CHECK(e16 / e32 >= 1.8);
    CHECK(e16 / e32 <= 2.2);

    const double m8 = err_at(SolverMethod::Midpoint, 8);
    const double m16 = err_at(SolverMethod::Midpoint, 16);
    const double m32 = err_at(SolverMethod::Midpoint, 32);
    CHECK(m8 / m16 >= 3.5);
    CHECK(m8 / m16 <= 4.5);
    CHECK(m16 / m32 >= 3.5);
    CHECK(m16 / m32 <= 4.5);
}

namespace {

VFConfig sampler_test_config() {
    VFConfig cfg;
    cfg.layers = 2;
    cfg.dim = 8;
    cfg.heads = 2;
    cfg.ffn_dim = 16;
    cfg.in_channels = 4;
    cfg.out_channels = 2;
    cfg.cond_dim = 3;
    return cfg;
}

CondTokensT<float> sampler_test_cond(Rng& rng) {
    Tensor toks({2, 3});
    for (std::size_t i = 0; i < toks.numel(); ++i) {
        toks.at(i) = static_cast<float>(rng.uniform(-1.0, 1.0));
    }
    return CondTokensT<float>(std::move(toks));
}

}  // namespace

TEST_CASE("sample_stage: accounting, context preservation, determinism") {
    auto model = init_vector_field<float>(sampler_test_config(), 41);
    PathParams path(1e-5);
    Rng rng(43);
    auto cond = sampler_test_cond(rng);
    const std::size_t L = 10;
    Tensor x_ctx({L, 2});
    for (std::size_t i = 0; i < x_ctx.numel(); ++i) {
        x_ctx.at(i) = static_cast<float>(rng.uniform(-1.0, 1.0));
    }

    SUBCASE("full mask, alpha 0: pure conditional generation accounting") {
        MaskSpec full = task_mask(MaskTask::TTM, L);
        SolverConfig cfg{SolverMethod::Euler, 5, 0.0};
        auto r = sample_stage(model, cond, Tensor::zeros({L, 2}), full, cfg, path, 9);
        CHECK(r.nfe == 5);
        SolverConfig mid{SolverMethod::Midpoint, 5, 0.0};
        auto rm = sample_stage(model, cond, Tensor::zeros({L, 2}), full, mid, path, 9);
        CHECK(rm.nfe == 10);
        SolverConfig guided{SolverMethod::Midpoint, 5, 1.0};
        auto rg = sample_stage(model, cond, Tensor::zeros({L, 2}), full, guided, path, 9);
        CHECK(rg.nfe == 20);
    }

    SUBCASE("infilling keeps context frames bit-exactly") {
        MaskSpec infill = task_mask(MaskTask::Infilling, L, 0.2, 0.7);
        SolverConfig cfg{SolverMethod::Midpoint, 6, 1.5};
        auto r = sample_stage(model, cond, x_ctx, infill, cfg, path, 77);
        for (std::size_t i = 0; i < L; ++i) {
            if (infill.m[i]) continue;
            for (std::size_t j = 0; j < 2; ++j) CHECK(r.features.at(i, j) == x_ctx.at(i, j));
        }
        // masked frames moved away from their prior values
        bool changed = false;
        for (std::size_t i = 0; i < L; ++i) {
            if (!infill.m[i]) continue;
            for (std::size_t j = 0; j < 2; ++j) {
                changed |= r.features.at(i, j) != x_ctx.at(i, j);
            }
        }
        CHECK(changed);
    }

    SUBCASE("same seed, same output; different seed differs") {
        MaskSpec full = task_mask(MaskTask::TTM, L);
        SolverConfig cfg{SolverMethod::Midpoint, 4, 1.0};
        auto r1 = sample_stage(model, cond, Tensor::zeros({L, 2}), full, cfg, path, 1234);
        auto r2 = sample_stage(model, cond, Tensor::zeros({L, 2}), full, cfg, path, 1234);
        for (std::size_t i = 0; i < r1.features.numel(); ++i) {
            CHECK(r1.features.at(i) == r2.features.at(i));
        }
        CHECK(r1.seed == 1234);
        auto r3 = sample_stage(model, cond, Tensor::zeros({L, 2}), full, cfg, path, 1235);
        bool differs = false;
        for (std::size_t i = 0; i < r1.features.numel(); ++i) {
            differs |= r1.features.at(i) != r3.features.at(i);
        }
        CHECK(differs);
    }
}
