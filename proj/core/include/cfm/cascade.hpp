#pragma once

#include <cstdint>
#include <string>

#include "cfm/cond.hpp"
#include "cfm/errors.hpp"
#include "cfm/masking.hpp"
#include "cfm/path.hpp"
#include "cfm/sampler.hpp"
#include "cfm/vectorfield.hpp"

namespace cfm {

/// Per-channel linear interpolation of an [M x C] sequence to out_len frames.
/// Endpoints are preserved; output frame j reads source position
/// j (M-1)/(out_len-1). M == 1 extends the single frame.
template <class T>
TensorT<T> interpolate(const TensorT<T>& h, std::size_t out_len) {
    if (h.rank() != 2) throw ShapeError("interpolate: rank-2 input required");
    if (out_len < 1) throw RangeError("interpolate: out_len must be >= 1");
    const std::size_t M = h.rows(), C = h.cols();
    if (M == out_len) return h;
    TensorT<T> out({out_len, C});
    if (M == 1) {
        for (std::size_t j = 0; j < out_len; ++j) {
            for (std::size_t c = 0; c < C; ++c) out.at(j, c) = h.at(0, c);
        }
        return out;
    }
    const double scale = out_len > 1
        ? static_cast<double>(M - 1) / static_cast<double>(out_len - 1)
        : 0.0;
    for (std::size_t j = 0; j < out_len; ++j) {
        const double pos = static_cast<double>(j) * scale;
        std::size_t lo = static_cast<std::size_t>(pos);
        if (lo >= M - 1) lo = M - 2;
        const double frac = pos - static_cast<double>(lo);
        for (std::size_t c = 0; c < C; ++c) {
            const double a = static_cast<double>(h.at(lo, c));
            const double b = static_cast<double>(h.at(lo + 1, c));
            out.at(j, c) = static_cast<T>(a + frac * (b - a));
        }
    }
    return out;
}

/// Both stage models plus the data geometry they were trained for.
template <class T>
struct CascadeBundle {
    VectorFieldModel<T> stage1;  // semantic features, [M x C_h]
    VectorFieldModel<T> stage2;  // acoustic features, [N x C_e]
    int semantic_len = 0;        // M
    int acoustic_len = 0;        // N
    int semantic_dim = 0;        // C_h
    int acoustic_dim = 0;        // C_e

    double rate_ratio() const {
        return static_cast<double>(acoustic_len) / static_cast<double>(semantic_len);
    }

    void validate() const {
        if (semantic_len < 1 || acoustic_len < semantic_len) {
            throw RangeError("CascadeBundle: need N >= M >= 1");
        }
        if (stage1.config.out_channels != semantic_dim ||
            stage1.config.in_channels != 2 * semantic_dim) {
            throw ShapeError("CascadeBundle: stage1 channels do not match C_h");
        }
        if (stage2.config.out_channels != acoustic_dim ||
            stage2.config.in_channels != 2 * acoustic_dim + semantic_dim) {
            throw ShapeError(
                "CascadeBundle: stage2 input must cover e, e_ctx and aligned h");
        }
    }
};

/// One generation call: task, fractional boundaries, optional context
/// features (required unless TTM), per-stage solver settings.
template <class T>
struct GenerationRequest {
    CondTokensT<T> cond;
    MaskTask task = MaskTask::TTM;
    double t1_frac = 0.0;
    double t2_frac = 1.0;
    TensorT<T> h_ctx;  // [M x C_h] when task != TTM
    TensorT<T> e_ctx;  // [N x C_e] when task != TTM
    SolverConfig solver1;
    SolverConfig solver2;
    std::uint64_t seed = 0;

    void validate(bool needs_context) const {
        if (needs_context && (h_ctx.empty() || e_ctx.empty())) {
            throw UsageError("GenerationRequest: task requires h_ctx and e_ctx");
        }
    }
};

template <class T>
struct GenerateResult {
    TensorT<T> h_hat;
    TensorT<T> e_hat;
    int stage1_nfe = 0;
    int stage2_nfe = 0;
    int total_nfe = 0;
};

/// Text -> semantic -> acoustic generation. Both stages use the task mask at
/// their own lengths (the fractional boundaries are shared); the stage-1
/// sample is linearly interpolated to the acoustic length and conditions
/// stage 2 alongside the acoustic context.
template <class T>
GenerateResult<T> generate(const CascadeBundle<T>& bundle,
                           const GenerationRequest<T>& req, const PathParams& path) {
    bundle.validate();
    const bool needs_ctx = req.task != MaskTask::TTM;
    req.validate(needs_ctx);
    const auto M = static_cast<std::size_t>(bundle.semantic_len);
    const auto N = static_cast<std::size_t>(bundle.acoustic_len);

    MaskSpec mask1 = task_mask(req.task, M, req.t1_frac, req.t2_frac);
    TensorT<T> h_ctx = needs_ctx
        ? req.h_ctx
        : TensorT<T>::zeros({M, static_cast<std::size_t>(bundle.semantic_dim)});
    Rng seeds(req.seed);
    SampleResult<T> s1 = sample_stage(bundle.stage1, req.cond, h_ctx, mask1,
                                      req.solver1, path,
                                      seeds.fork("stage1").next_u64());

    TensorT<T> h_aligned = interpolate(s1.features, N);

    MaskSpec mask2 = task_mask(req.task, N, req.t1_frac, req.t2_frac);
    TensorT<T> e_ctx = needs_ctx
        ? req.e_ctx
        : TensorT<T>::zeros({N, static_cast<std::size_t>(bundle.acoustic_dim)});
    SampleResult<T> s2 = sample_stage(bundle.stage2, req.cond, e_ctx, mask2,
                                      req.solver2, path,
                                      seeds.fork("stage2").next_u64(), h_aligned);

    GenerateResult<T> out;
    out.h_hat = std::move(s1.features);
    out.e_hat = std::move(s2.features);
    out.stage1_nfe = s1.nfe;
    out.stage2_nfe = s2.nfe;
    out.total_nfe = s1.nfe + s2.nfe;
    return out;
}

/// Direct text -> acoustic generation without the semantic stage; the
/// ablation baseline. Uses the request's stage-2 solver settings. `e_ctx`
/// must always be sized [N x C_e] (zeros for TTM) since it defines the
/// output length.
template <class T>
SampleResult<T> single_stage_baseline(const VectorFieldModel<T>& model,
                                      const GenerationRequest<T>& req,
                                      const PathParams& path) {
    if (req.e_ctx.empty()) {
        throw UsageError("single_stage_baseline: e_ctx must define the output shape");
    }
    MaskSpec mask = task_mask(req.task, req.e_ctx.rows(), req.t1_frac, req.t2_frac);
    return sample_stage(model, req.cond, req.e_ctx, mask, req.solver2, path,
                        Rng(req.seed).fork("single").next_u64());
}

}  // namespace cfm
