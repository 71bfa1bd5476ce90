#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>

#include "cfm/cond.hpp"
#include "cfm/errors.hpp"
#include "cfm/masking.hpp"
#include "cfm/path.hpp"
#include "cfm/rng.hpp"
#include "cfm/vectorfield.hpp"

namespace cfm {

enum class SolverMethod : std::uint8_t { Euler, Midpoint };

struct SolverConfig {
    SolverMethod method = SolverMethod::Midpoint;
    int steps = 32;
    double guidance_alpha = 0.0;

    void validate() const {
        if (steps < 1) throw RangeError("SolverConfig: steps must be >= 1");
        if (guidance_alpha < 0.0) throw RangeError("SolverConfig: alpha must be >= 0");
    }

    int evals_per_step() const { return method == SolverMethod::Midpoint ? 2 : 1; }

    /// Network forwards: steps x (1 or 2), doubled again under guidance.
    int nfe() const {
        return steps * evals_per_step() * (guidance_alpha > 0.0 ? 2 : 1);
    }
};

template <class T>
struct SampleResult {
    TensorT<T> features;
    int nfe = 0;
    std::uint64_t seed = 0;
};

/// Guided field v_cond + alpha (v_cond - v_uncond), algebraically
/// (1 + alpha) v_cond - alpha v_uncond. alpha = 0 returns v_cond exactly and
/// v_cond == v_uncond is a fixed point for every alpha.
template <class T>
TensorT<T> cfg_field(const TensorT<T>& v_cond, const TensorT<T>& v_uncond, T alpha) {
    if (!v_cond.same_shape(v_uncond)) {
        throw ShapeError("cfg_field: field shapes differ");
    }
    if (alpha == T(0)) return v_cond;
    TensorT<T> out(v_cond.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) {
        out.at(i) = v_cond.at(i) + alpha * (v_cond.at(i) - v_uncond.at(i));
    }
    return out;
}

template <class T>
struct IntegrateResult {
    TensorT<T> state;
    int field_evals = 0;
};

/// Fixed-step ODE solve of dx/dt = f(x, t) from t=0 to t=1.
/// Euler: x <- x + h f(x, t). Midpoint: x <- x + h f(x + h/2 f(x, t), t + h/2).
template <class T, class F>
IntegrateResult<T> integrate(F&& field_fn, TensorT<T> x0, const SolverConfig& cfg) {
    cfg.validate();
    const T h = T(1) / static_cast<T>(cfg.steps);
    IntegrateResult<T> r;
    r.state = std::move(x0);
    for (int s = 0; s < cfg.steps; ++s) {
        const T t = static_cast<T>(s) * h;
        TensorT<T> k1 = field_fn(r.state, t);
        ++r.field_evals;
        if (cfg.method == SolverMethod::Euler) {
            for (std::size_t i = 0; i < r.state.numel(); ++i) {
                r.state.at(i) += h * k1.at(i);
            }
        } else {
            TensorT<T> mid(r.state.shape());
            const T half = h / T(2);
            for (std::size_t i = 0; i < mid.numel(); ++i) {
                mid.at(i) = r.state.at(i) + half * k1.at(i);
            }
            TensorT<T> k2 = field_fn(mid, t + half);
            ++r.field_evals;
            for (std::size_t i = 0; i < r.state.numel(); ++i) {
                r.state.at(i) += h * k2.at(i);
            }
        }
        if (!r.state.all_finite()) {
            throw NumericalError("integrate: non-finite state after step " +
                                 std::to_string(s));
        }
    }
    return r;
}

/// Samples one stage by integrating the learned field from a Gaussian prior
/// over to-generate frames. Context frames are pinned to their given values
/// for every field evaluation (the field is zeroed there so they never
/// drift) and overwritten once more at the end as a guarantee. Under
/// guidance the unconditional pass uses the learned null token and an
/// all-zero context block.
///
/// `x_ctx` spans the full sequence [L x C]; only its context frames are
/// read. `aux` carries extra conditioning channels (the aligned semantic
/// features for the acoustic stage) and may be empty.
template <class T>
SampleResult<T> sample_stage(const VectorFieldModel<T>& model,
                             const CondTokensT<T>& cond, const TensorT<T>& x_ctx,
                             const MaskSpec& mask, const SolverConfig& cfg,
                             const PathParams& path, std::uint64_t seed,
                             const TensorT<T>& aux = TensorT<T>()) {
    cfg.validate();
    (void)path;  // the prior is the path's t=0 marginal, N(0, I)
    const std::size_t L = mask.length();
    const std::size_t C = static_cast<std::size_t>(model.config.out_channels);
    if (x_ctx.rank() != 2 || x_ctx.rows() != L || x_ctx.cols() != C) {
        throw ShapeError("sample_stage: x_ctx must be [L x out_channels]");
    }

    TensorT<T> ctx_cond = apply_context(x_ctx, mask);
    if (!aux.empty()) ctx_cond = concat_cols(ctx_cond, aux);
    const bool guided = cfg.guidance_alpha > 0.0;
    TensorT<T> ctx_uncond;
    if (guided) ctx_uncond = TensorT<T>::zeros(ctx_cond.shape());
    const CondTokensT<T> null_cond = CondTokensT<T>::null_cond();
    const T alpha = static_cast<T>(cfg.guidance_alpha);

    Rng rng = Rng(seed).fork("sample-stage");
    TensorT<T> x0({L, C});
    for (std::size_t i = 0; i < x0.numel(); ++i) x0.at(i) = static_cast<T>(rng.normal());
    for (std::size_t i = 0; i < L; ++i) {
        if (mask.m[i]) continue;
        for (std::size_t j = 0; j < C; ++j) x0.at(i, j) = x_ctx.at(i, j);
    }

    Tape<T> tape;
    TapeParams<T> tp = register_params(tape, model, /*with_grad=*/false);
    const std::size_t base = tape.size();
    int forwards = 0;

    auto field_fn = [&](const TensorT<T>& x, T t) {
        auto vc_id = vf_forward(tape, model, tp, tape.leaf(x), tape.leaf(ctx_cond), cond, t);
        TensorT<T> v = tape.val(vc_id);
        ++forwards;
        if (guided) {
            auto vu_id = vf_forward(tape, model, tp, tape.leaf(x), tape.leaf(ctx_uncond),
                                    null_cond, t);
            v = cfg_field(v, tape.val(vu_id), alpha);
            ++forwards;
        }
        tape.truncate(base);
        for (std::size_t i = 0; i < L; ++i) {
            if (mask.m[i]) continue;
            for (std::size_t j = 0; j < C; ++j) v.at(i, j) = T(0);
        }
        return v;
    };

    IntegrateResult<T> res = integrate(field_fn, std::move(x0), cfg);
    for (std::size_t i = 0; i < L; ++i) {
        if (mask.m[i]) continue;
        for (std::size_t j = 0; j < C; ++j) res.state.at(i, j) = x_ctx.at(i, j);
    }

    SampleResult<T> out;
    out.features = std::move(res.state);
    out.nfe = forwards;
    out.seed = seed;
    if (out.nfe != cfg.nfe()) {
        throw NumericalError("sample_stage: NFE accounting mismatch");
    }
    return out;
}

}  // namespace cfm
