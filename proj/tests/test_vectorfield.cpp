#include <doctest.h>

#include <cmath>
#include <vector>

#include "cfm/vectorfield.hpp"
#include "test_support.hpp"

using namespace cfm;

namespace {

VFConfig tiny_config() {
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

template <class T>
CondTokensT<T> random_cond(std::size_t n_tokens, std::size_t cond_dim, Rng& rng) {
    TensorT<T> toks({n_tokens, cond_dim});
    for (std::size_t i = 0; i < toks.numel(); ++i) {
        toks.at(i) = static_cast<T>(rng.uniform(-1.0, 1.0));
    }
    return CondTokensT<T>(std::move(toks));
}

}  // namespace

TEST_CASE("config validation") {
    VFConfig cfg = tiny_config();
    CHECK_NOTHROW(cfg.validate());

    VFConfig odd = cfg;
    odd.layers = 3;
    CHECK_THROWS_AS(odd.validate(), RangeError);
    odd.use_skips = false;
    CHECK_NOTHROW(odd.validate());

    VFConfig heads = cfg;
    heads.dim = 64;
    heads.heads = 4;
    CHECK(heads.head_dim() == 16);
    heads.heads = 5;
    CHECK_THROWS_AS(heads.validate(), RangeError);

    VFConfig chan = cfg;
    chan.in_channels = chan.out_channels;
    CHECK_THROWS_AS(chan.validate(), RangeError);
}

TEST_CASE("init is deterministic and shapes follow the config") {
    VFConfig cfg = tiny_config();
    auto m1 = init_vector_field<float>(cfg, 99);
    auto m2 = init_vector_field<float>(cfg, 99);
    REQUIRE(m1.params.size() == m2.params.size());
    for (std::size_t p = 0; p < m1.params.size(); ++p) {
        CHECK(m1.params[p].first == m2.params[p].first);
        REQUIRE(m1.params[p].second.numel() == m2.params[p].second.numel());
        for (std::size_t i = 0; i < m1.params[p].second.numel(); ++i) {
            CHECK(m1.params[p].second.at(i) == m2.params[p].second.at(i));
        }
    }
    auto m3 = init_vector_field<float>(cfg, 100);
    bool any_diff = false;
    for (std::size_t i = 0; i < m1.params[0].second.numel(); ++i) {
        any_diff |= m1.params[0].second.at(i) != m3.params[0].second.at(i);
    }
    CHECK(any_diff);

    CHECK(m1.param("in.w").shape() == std::vector<std::size_t>{4, 8});
    CHECK(m1.param("out.w").shape() == std::vector<std::size_t>{8, 2});
    CHECK(m1.param("blocks.1.skip.w").shape() == std::vector<std::size_t>{16, 8});
    CHECK(m1.param("null_token").shape() == std::vector<std::size_t>{1, 3});

    // unique names
    for (std::size_t i = 0; i < m1.params.size(); ++i) {
        for (std::size_t j = i + 1; j < m1.params.size(); ++j) {
            CHECK(m1.params[i].first != m1.params[j].first);
        }
    }
}

TEST_CASE("forward: shape contract and zero-parameter null output") {
    VFConfig cfg = tiny_config();
    auto model = init_vector_field<double>(cfg, 7);
    Rng rng(3);
    for (std::size_t L : {1, 4, 9}) {
        Tensor64 x = cfm::test::random_tensor({L, 2}, rng);
        Tensor64 ctx = cfm::test::random_tensor({L, 2}, rng);
        auto cond = random_cond<double>(2, 3, rng);
        Tensor64 out = vf_apply(model, x, ctx, cond, 0.4);
        CHECK(out.shape() == std::vector<std::size_t>({L, 2}));
        CHECK(out.all_finite());
    }

    auto zeroed = model;
    for (auto& [name, t] : zeroed.params) {
        for (std::size_t i = 0; i < t.numel(); ++i) t.at(i) = 0.0;
    }
    Tensor64 x = cfm::test::random_tensor({5, 2}, rng);
    Tensor64 ctx = cfm::test::random_tensor({5, 2}, rng);
    auto cond = random_cond<double>(2, 3, rng);
    Tensor64 out = vf_apply(zeroed, x, ctx, cond, 0.8);
    for (std::size_t i = 0; i < out.numel(); ++i) CHECK(out.at(i) == 0.0);
}

TEST_CASE("forward is deterministic and rejects bad arguments") {
    VFConfig cfg = tiny_config();
    auto model = init_vector_field<double>(cfg, 11);
    Rng rng(5);
    Tensor64 x = cfm::test::random_tensor({6, 2}, rng);
    Tensor64 ctx = cfm::test::random_tensor({6, 2}, rng);
    auto cond = random_cond<double>(3, 3, rng);
    Tensor64 a = vf_apply(model, x, ctx, cond, 0.25);
    Tensor64 b = vf_apply(model, x, ctx, cond, 0.25);
    for (std::size_t i = 0; i < a.numel(); ++i) CHECK(a.at(i) == b.at(i));

    CHECK_THROWS_AS(vf_apply(model, x, ctx, cond, 1.5), RangeError);
    Tensor64 bad_ctx = cfm::test::random_tensor({6, 3}, rng);
    CHECK_THROWS_AS(vf_apply(model, x, bad_ctx, cond, 0.5), ShapeError);
    auto bad_cond = random_cond<double>(2, 5, rng);
    CHECK_THROWS_AS(vf_apply(model, x, ctx, bad_cond, 0.5), ShapeError);
}

TEST_CASE("cross-attention is order-equivariant in condition tokens") {
    VFConfig cfg = tiny_config();
    auto model = init_vector_field<double>(cfg, 13);
    Rng rng(7);
    Tensor64 x = cfm::test::random_tensor({5, 2}, rng);
    Tensor64 ctx = cfm::test::random_tensor({5, 2}, rng);

    TensorT<double> toks({2, 3});
    for (std::size_t i = 0; i < toks.numel(); ++i) toks.at(i) = rng.uniform(-1, 1);
    TensorT<double> swapped({2, 3});
    for (std::size_t j = 0; j < 3; ++j) {
        swapped.at(0, j) = toks.at(1, j);
        swapped.at(1, j) = toks.at(0, j);
    }
    Tensor64 a = vf_apply(model, x, ctx, CondTokensT<double>(toks), 0.6);
    Tensor64 b = vf_apply(model, x, ctx, CondTokensT<double>(swapped), 0.6);
    // two tokens: every reduction is a commutative two-term sum, so the
    // outputs agree bit for bit
    for (std::size_t i = 0; i < a.numel(); ++i) CHECK(a.at(i) == b.at(i));

    // larger token counts reassociate the reductions; agreement is numerical
    TensorT<double> four({4, 3});
    for (std::size_t i = 0; i < four.numel(); ++i) four.at(i) = rng.uniform(-1, 1);
    TensorT<double> perm({4, 3});
    const std::size_t order[4] = {2, 0, 3, 1};
    for (std::size_t r = 0; r < 4; ++r) {
        for (std::size_t j = 0; j < 3; ++j) perm.at(r, j) = four.at(order[r], j);
    }
    Tensor64 c = vf_apply(model, x, ctx, CondTokensT<double>(four), 0.6);
    Tensor64 d = vf_apply(model, x, ctx, CondTokensT<double>(perm), 0.6);
    for (std::size_t i = 0; i < c.numel(); ++i) {
        CHECK(std::fabs(c.at(i) - d.at(i)) <= 1e-9);
    }
}

TEST_CASE("forward is continuous in t") {
    VFConfig cfg = tiny_config();
    auto model = init_vector_field<double>(cfg, 17);
    Rng rng(11);
    Tensor64 x = cfm::test::random_tensor({6, 2}, rng);
    Tensor64 ctx = cfm::test::random_tensor({6, 2}, rng);
    auto cond = random_cond<double>(2, 3, rng);
    for (double t : {0.0, 0.31, 0.77}) {
        Tensor64 a = vf_apply(model, x, ctx, cond, t);
        Tensor64 b = vf_apply(model, x, ctx, cond, t + 1e-6);
        for (std::size_t i = 0; i < a.numel(); ++i) {
            CHECK(std::fabs(a.at(i) - b.at(i)) <= 1e-3);
        }
    }
}

TEST_CASE("alibi bias is symmetric with the documented slopes") {
    for (int heads : {2, 4, 8}) {
        for (int h = 0; h < heads; ++h) {
            const double expected = std::pow(2.0, -8.0 * (h + 1) / heads);
            CHECK(vf::alibi_slope(h, heads) == doctest::Approx(expected).epsilon(1e-12));
        }
    }
    Tensor64 b = vf::alibi_bias<double>(7, 0.25);
    for (std::size_t i = 0; i < 7; ++i) {
        CHECK(b.at(i, i) == 0.0);
        for (std::size_t j = 0; j < 7; ++j) {
            CHECK(b.at(i, j) == b.at(j, i));
            CHECK(b.at(i, j) == doctest::Approx(-0.25 * std::fabs(double(i) - double(j))));
        }
    }
}

TEST_CASE("skip pairing consumes each lower block exactly once") {
    for (int layers : {2, 4, 6, 8}) {
        std::vector<int> consumed(layers, 0);
        for (int l = layers / 2; l < layers; ++l) {
            const int p = vf::skip_partner(l, layers);
            REQUIRE(p >= 0);
            REQUIRE(p < layers / 2);
            consumed[static_cast<std::size_t>(p)] += 1;
        }
        for (int l = 0; l < layers / 2; ++l) {
            CHECK(consumed[static_cast<std::size_t>(l)] == 1);
        }
    }

    // behavioral: with skips on, zeroing a lower block's saved output path
    // (via its FFN output projection) changes the result
    VFConfig cfg = tiny_config();
    auto model = init_vector_field<double>(cfg, 23);
    Rng rng(29);
    Tensor64 x = cfm::test::random_tensor({4, 2}, rng);
    Tensor64 ctx = cfm::test::random_tensor({4, 2}, rng);
    auto cond = random_cond<double>(2, 3, rng);
    Tensor64 base = vf_apply(model, x, ctx, cond, 0.5);
    auto tweaked = model;
    for (auto& [name, t] : tweaked.params) {
        if (name == "blocks.1.skip.w") {
            for (std::size_t i = 0; i < t.numel(); ++i) t.at(i) = 0.0;
        }
    }
    Tensor64 cut = vf_apply(tweaked, x, ctx, cond, 0.5);
    bool differs = false;
    for (std::size_t i = 0; i < base.numel(); ++i) differs |= base.at(i) != cut.at(i);
    CHECK(differs);
}

TEST_CASE("full forward gradients match finite differences on the tiny config") {
    VFConfig cfg = tiny_config();
    auto model = init_vector_field<double>(cfg, 31);
    Rng rng(37);
    const std::size_t L = 4;
    Tensor64 x = cfm::test::random_tensor({L, 2}, rng);
    Tensor64 ctx = cfm::test::random_tensor({L, 2}, rng);
    auto cond = random_cond<double>(2, 3, rng);
    const double t = 0.62;

    Tape<double> tape;
    TapeParams<double> tp = register_params(tape, model, true);
    auto out = vf_forward(tape, model, tp, tape.leaf(x), tape.leaf(ctx), cond, t);
    auto loss = tape.mean_sq(out);
    tape.backward(loss);

    double worst = 0.0;
    for (std::size_t p = 0; p < model.params.size(); ++p) {
        auto loss_of = [&](const Tensor64& replaced) {
            auto probe = model;
            probe.params[p].second = replaced;
            Tape<double> t2;
            TapeParams<double> tp2 = register_params(t2, probe, false);
            auto o2 = vf_forward(t2, probe, tp2, t2.leaf(x), t2.leaf(ctx), cond, t);
            return t2.val(t2.mean_sq(o2)).at(0);
        };
        worst = std::max(worst, cfm::test::max_grad_rel_err(
                                    loss_of, model.params[p].second,
                                    tape.grad(tp.ids[p])));
    }
    CHECK(worst <= 1e-4);
}
