#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cfm/cond.hpp"
#include "cfm/errors.hpp"
#include "cfm/rng.hpp"
#include "cfm/tensor.hpp"

namespace cfm {

enum class MaskTask : std::uint8_t { TTM, Continuation, Infilling, TrainingSpan };

/// Binary temporal mask; 1 marks frames to generate, 0 marks context.
struct MaskSpec {
    std::vector<std::uint8_t> m;
    MaskTask task = MaskTask::TTM;

    std::size_t length() const { return m.size(); }

    std::size_t ones() const {
        std::size_t n = 0;
        for (auto v : m) n += v;
        return n;
    }
};

/// Condition-dropout probabilities for classifier-free guidance training.
struct CondDropConfig {
    double p_text = 0.3;
    double p_ctx = 0.3;

    CondDropConfig() = default;
    CondDropConfig(double text, double ctx) : p_text(text), p_ctx(ctx) {
        if (p_text < 0.0 || p_text > 1.0 || p_ctx < 0.0 || p_ctx > 1.0) {
            throw RangeError("CondDropConfig: probabilities must be in [0, 1]");
        }
    }
};

namespace detail {
// Mask boundaries use round-half-away-from-zero on frac*L.
inline std::size_t round_frac(double frac, std::size_t length) {
    return static_cast<std::size_t>(std::llround(frac * static_cast<double>(length)));
}
}  // namespace detail

/// One contiguous run of ones whose length is round(r*L) with
/// r ~ Uniform[ratio_lo, ratio_hi] and a uniformly placed start.
inline MaskSpec sample_span_mask(std::size_t length, double ratio_lo,
                                 double ratio_hi, Rng& rng) {
    if (length < 1) throw RangeError("sample_span_mask: L must be >= 1");
    if (!(ratio_lo > 0.0) || ratio_lo > ratio_hi || ratio_hi > 1.0) {
        throw RangeError("sample_span_mask: need 0 < ratio_lo <= ratio_hi <= 1");
    }
    const double r = rng.uniform(ratio_lo, ratio_hi);
    std::size_t span = detail::round_frac(r, length);
    if (span < 1) span = 1;
    if (span > length) span = length;
    const std::size_t start =
        static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::uint64_t>(length - span)));
    MaskSpec spec;
    spec.task = MaskTask::TrainingSpan;
    spec.m.assign(length, 0);
    for (std::size_t i = start; i < start + span; ++i) spec.m[i] = 1;
    return spec;
}

/// Fixed inference masks: full generation, suffix continuation, or one
/// interior infilling span with boundaries at round(frac*L).
inline MaskSpec task_mask(MaskTask task, std::size_t length, double t1_frac = 0.0,
                          double t2_frac = 1.0) {
    if (length < 1) throw RangeError("task_mask: L must be >= 1");
    if (t1_frac < 0.0 || t1_frac > t2_frac || t2_frac > 1.0) {
        throw RangeError("task_mask: need 0 <= t1_frac <= t2_frac <= 1");
    }
    MaskSpec spec;
    spec.task = task;
    spec.m.assign(length, 0);
    switch (task) {
        case MaskTask::TTM:
            spec.m.assign(length, 1);
            break;
        case MaskTask::Continuation: {
            const std::size_t t1 = detail::round_frac(t1_frac, length);
            for (std::size_t i = t1; i < length; ++i) spec.m[i] = 1;
            break;
        }
        case MaskTask::Infilling: {
            const std::size_t t1 = detail::round_frac(t1_frac, length);
            const std::size_t t2 = detail::round_frac(t2_frac, length);
            for (std::size_t i = t1; i < t2 && i < length; ++i) spec.m[i] = 1;
            break;
        }
        case MaskTask::TrainingSpan:
            throw UsageError("task_mask: TrainingSpan comes from sample_span_mask");
    }
    if (spec.ones() == 0) {
        throw UsageError("task_mask: mask has no frames to generate");
    }
    return spec;
}

/// x_ctx = x with to-generate frames zeroed.
template <class T>
TensorT<T> apply_context(const TensorT<T>& x, const MaskSpec& mask) {
    if (x.rank() != 2 || x.rows() != mask.length()) {
        throw ShapeError("apply_context: mask length must equal frame count");
    }
    TensorT<T> out = x;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        if (!mask.m[i]) continue;
        for (std::size_t j = 0; j < x.cols(); ++j) out.at(i, j) = T(0);
    }
    return out;
}

/// Mask as an [L x C] 0/1 matrix for elementwise gating.
template <class T>
TensorT<T> mask_matrix(const MaskSpec& mask, std::size_t channels) {
    TensorT<T> out({mask.length(), channels});
    for (std::size_t i = 0; i < mask.length(); ++i) {
        const T v = mask.m[i] ? T(1) : T(0);
        for (std::size_t j = 0; j < channels; ++j) out.at(i, j) = v;
    }
    return out;
}

struct DropFlags {
    bool text_dropped = false;
    bool ctx_dropped = false;
};

/// Independently replaces each condition with its null form: dropped text
/// becomes the null token sequence (substituted by the model's learned null
/// token at forward time), dropped context becomes all zeros.
template <class T>
DropFlags drop_conditions(CondTokensT<T>& text_cond, TensorT<T>& ctx,
                          const CondDropConfig& cfg, Rng& rng) {
    DropFlags flags;
    flags.text_dropped = rng.bernoulli(cfg.p_text);
    flags.ctx_dropped = rng.bernoulli(cfg.p_ctx);
    if (flags.text_dropped) text_cond = CondTokensT<T>::null_cond();
    if (flags.ctx_dropped && !ctx.empty()) {
        ctx = TensorT<T>::zeros(ctx.shape());
    }
    return flags;
}

}  // namespace cfm
