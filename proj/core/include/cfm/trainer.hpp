#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cfm/cond.hpp"
#include "cfm/errors.hpp"
#include "cfm/masking.hpp"
#include "cfm/path.hpp"
#include "cfm/rng.hpp"
#include "cfm/tape.hpp"
#include "cfm/vectorfield.hpp"

namespace cfm {

enum class Stage : std::uint8_t { Semantic, Acoustic, SingleStage };

inline const char* stage_name(Stage s) {
    switch (s) {
        case Stage::Semantic: return "semantic";
        case Stage::Acoustic: return "acoustic";
        case Stage::SingleStage: return "single";
    }
    return "?";
}

struct TrainConfig {
    double lr_peak = 2e-4;
    int warmup_steps = 4000;
    int total_steps = 20000;
    int batch_frames = 256;
    double mask_ratio_lo = 0.7;
    double mask_ratio_hi = 1.0;
    CondDropConfig cond_drop;
    std::uint64_t seed = 0;
    Stage stage = Stage::Semantic;

    // Adam settings; lr comes from the schedule.
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double grad_clip = 1.0;

    void validate() const {
        if (!(lr_peak > 0.0)) throw RangeError("TrainConfig: lr_peak must be positive");
        if (warmup_steps < 0 || warmup_steps >= total_steps) {
            throw RangeError("TrainConfig: need 0 <= warmup_steps < total_steps");
        }
        if (batch_frames < 1) throw RangeError("TrainConfig: batch_frames must be >= 1");
        if (!(mask_ratio_lo > 0.0) || mask_ratio_lo > mask_ratio_hi || mask_ratio_hi > 1.0) {
            throw RangeError("TrainConfig: bad mask ratio range");
        }
    }
};

/// Linear warmup from zero to lr_peak at warmup_steps, then linear decay to
/// zero at total_steps.
inline double lr_schedule(std::uint64_t step, const TrainConfig& cfg) {
    if (step > static_cast<std::uint64_t>(cfg.total_steps)) {
        throw RangeError("lr_schedule: step beyond total_steps");
    }
    const double s = static_cast<double>(step);
    if (step <= static_cast<std::uint64_t>(cfg.warmup_steps)) {
        return cfg.warmup_steps == 0 ? cfg.lr_peak : cfg.lr_peak * s / cfg.warmup_steps;
    }
    const double rest = static_cast<double>(cfg.total_steps - cfg.warmup_steps);
    return cfg.lr_peak * (static_cast<double>(cfg.total_steps) - s) / rest;
}

/// One training example: the target sequence, optional extra conditioning
/// channels (stage 2 receives the length-aligned semantic features here),
/// and the description tokens.
template <class T>
struct BatchItem {
    TensorT<T> x1;
    TensorT<T> aux;
    CondTokensT<T> cond;
};

/// Records the masked conditional flow-matching loss on `tape`.
///
/// The network input equals the noisy path point on to-generate frames and
/// the clean data on context frames, matching the sampler, which holds
/// context frames fixed at their clean values throughout integration.
/// `ctx_feats` is the pre-assembled context block ([x_ctx] or
/// [x_ctx || aligned h]), already zeroed if condition dropping fired.
template <class T>
typename Tape<T>::Id build_cfm_loss(Tape<T>& tape, const VectorFieldModel<T>& model,
                                    const TapeParams<T>& tp, const TensorT<T>& x1,
                                    const TensorT<T>& ctx_feats,
                                    const CondTokensT<T>& cond, const MaskSpec& mask,
                                    T t, const TensorT<T>& z, const PathParams& path) {
    if (mask.ones() == 0) throw UsageError("cfm_loss: mask selects no frames");
    if (x1.rank() != 2 || x1.rows() != mask.length()) {
        throw ShapeError("cfm_loss: mask length must match frame count");
    }
    const std::size_t L = x1.rows(), C = x1.cols();

    TensorT<T> x_t = sample_xt(x1, z, t, path);
    TensorT<T> x_in = x_t;
    for (std::size_t i = 0; i < L; ++i) {
        if (mask.m[i]) continue;
        for (std::size_t j = 0; j < C; ++j) x_in.at(i, j) = x1.at(i, j);
    }
    TensorT<T> u = target_field(x_t, x1, t, path);

    auto pred = vf_forward(tape, model, tp, tape.leaf(std::move(x_in)),
                           tape.leaf(ctx_feats), cond, t);
    auto diff = tape.sub(pred, tape.leaf(std::move(u)));
    auto gated = tape.mul(diff, tape.leaf(mask_matrix<T>(mask, C)));
    // mean over masked frame-elements, not over the full sequence
    const T rescale = static_cast<T>(L) / static_cast<T>(mask.ones());
    return tape.scale(tape.mean_sq(gated), rescale);
}

/// Loss value without gradients; context features derived from (x1, mask)
/// plus optional aligned conditioning channels.
template <class T>
T cfm_loss(const VectorFieldModel<T>& model, const TensorT<T>& x1,
           const CondTokensT<T>& cond, const MaskSpec& mask, T t,
           const TensorT<T>& z, const PathParams& path,
           const TensorT<T>& aux = TensorT<T>()) {
    Tape<T> tape;
    TapeParams<T> tp = register_params(tape, model, /*with_grad=*/false);
    TensorT<T> ctx = apply_context(x1, mask);
    if (!aux.empty()) ctx = concat_cols(ctx, aux);
    auto loss = build_cfm_loss(tape, model, tp, x1, ctx, cond, mask, t, z, path);
    return tape.val(loss).at(0);
}

template <class T>
struct AdamState {
    std::vector<TensorT<T>> m;
    std::vector<TensorT<T>> v;
    std::uint64_t step = 0;

    static AdamState init_like(const VectorFieldModel<T>& model) {
        AdamState st;
        st.m.reserve(model.params.size());
        st.v.reserve(model.params.size());
        for (const auto& [name, t] : model.params) {
            st.m.push_back(TensorT<T>::zeros(t.shape()));
            st.v.push_back(TensorT<T>::zeros(t.shape()));
        }
        return st;
    }
};

struct TrainStepResult {
    double loss = 0.0;
    double lr = 0.0;
    double grad_norm = 0.0;
};

/// Owns the optimizer state for one model. Steps are deterministic given
/// (config seed, step index); all per-step randomness is derived from those.
template <class T>
class Trainer {
public:
    Trainer(VectorFieldModel<T>& model, TrainConfig cfg, PathParams path)
        : model_(model), cfg_(std::move(cfg)), path_(path),
          state_(AdamState<T>::init_like(model)) {
        cfg_.validate();
    }

    AdamState<T>& state() { return state_; }
    const TrainConfig& config() const { return cfg_; }

    /// Draws (t, z, span mask, condition drops) per example, accumulates
    /// gradients of the masked CFM loss over the batch, and applies one Adam
    /// update at the scheduled learning rate.
    TrainStepResult step(const std::vector<BatchItem<T>>& batch, std::uint64_t step_index) {
        if (batch.empty()) throw UsageError("train step: empty batch");
        const std::size_t P = model_.params.size();
        std::vector<TensorT<T>> grads;
        grads.reserve(P);
        for (const auto& [name, t] : model_.params) grads.push_back(TensorT<T>::zeros(t.shape()));

        double loss_sum = 0.0;
        Rng step_rng = Rng(cfg_.seed).fork("train-step", step_index);
        for (std::size_t b = 0; b < batch.size(); ++b) {
            Rng rng = step_rng.fork("item", b);
            const BatchItem<T>& item = batch[b];
            const std::size_t L = item.x1.rows(), C = item.x1.cols();

            const T t = static_cast<T>(rng.uniform());
            TensorT<T> z({L, C});
            for (std::size_t i = 0; i < z.numel(); ++i) z.at(i) = static_cast<T>(rng.normal());
            MaskSpec mask = sample_span_mask(L, cfg_.mask_ratio_lo, cfg_.mask_ratio_hi, rng);

            CondTokensT<T> cond = item.cond;
            TensorT<T> ctx = apply_context(item.x1, mask);
            if (!item.aux.empty()) ctx = concat_cols(ctx, item.aux);
            drop_conditions(cond, ctx, cfg_.cond_drop, rng);

            tape_.clear();
            TapeParams<T> tp = register_params(tape_, model_, /*with_grad=*/true);
            auto loss = build_cfm_loss(tape_, model_, tp, item.x1, ctx, cond, mask, t, z, path_);
            const double lval = static_cast<double>(tape_.val(loss).at(0));
            if (!std::isfinite(lval)) {
                throw NumericalError("train step " + std::to_string(step_index) +
                                     ": non-finite loss");
            }
            loss_sum += lval;
            tape_.backward(loss);
            for (std::size_t p = 0; p < P; ++p) {
                const TensorT<T>& g = tape_.grad(tp.ids[p]);
                for (std::size_t i = 0; i < g.numel(); ++i) grads[p].at(i) += g.at(i);
            }
        }

        const T inv_batch = T(1) / static_cast<T>(batch.size());
        double sq_norm = 0.0;
        for (auto& g : grads) {
            for (std::size_t i = 0; i < g.numel(); ++i) {
                g.at(i) *= inv_batch;
                sq_norm += static_cast<double>(g.at(i)) * static_cast<double>(g.at(i));
            }
        }
        const double norm = std::sqrt(sq_norm);
        if (cfg_.grad_clip > 0.0 && norm > cfg_.grad_clip) {
            const T s = static_cast<T>(cfg_.grad_clip / norm);
            for (auto& g : grads) {
                for (std::size_t i = 0; i < g.numel(); ++i) g.at(i) *= s;
            }
        }

        const double lr = lr_schedule(step_index, cfg_);
        apply_adam(grads, lr);

        TrainStepResult r;
        r.loss = loss_sum / static_cast<double>(batch.size());
        r.lr = lr;
        r.grad_norm = norm;
        return r;
    }

private:
    void apply_adam(const std::vector<TensorT<T>>& grads, double lr) {
        state_.step += 1;
        const double b1 = cfg_.beta1, b2 = cfg_.beta2;
        const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state_.step));
        const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state_.step));
        for (std::size_t p = 0; p < grads.size(); ++p) {
            TensorT<T>& theta = model_.params[p].second;
            TensorT<T>& m = state_.m[p];
            TensorT<T>& v = state_.v[p];
            for (std::size_t i = 0; i < theta.numel(); ++i) {
                const double g = static_cast<double>(grads[p].at(i));
                const double mi = b1 * static_cast<double>(m.at(i)) + (1.0 - b1) * g;
                const double vi = b2 * static_cast<double>(v.at(i)) + (1.0 - b2) * g * g;
                m.at(i) = static_cast<T>(mi);
                v.at(i) = static_cast<T>(vi);
                const double mh = mi / bc1;
                const double vh = vi / bc2;
                theta.at(i) = static_cast<T>(static_cast<double>(theta.at(i)) -
                                             lr * mh / (std::sqrt(vh) + cfg_.adam_eps));
            }
        }
    }

    VectorFieldModel<T>& model_;
    TrainConfig cfg_;
    PathParams path_;
    AdamState<T> state_;
    Tape<T> tape_;
};

}  // namespace cfm
