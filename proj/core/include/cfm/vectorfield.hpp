#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cfm/cond.hpp"
#include "cfm/errors.hpp"
#include "cfm/rng.hpp"
#include "cfm/tape.hpp"
#include "cfm/tensor.hpp"

namespace cfm {

/// Backbone configuration. `in_channels` counts the full concatenated input
/// to the input projection (x_t plus all context/conditioning channels);
/// `out_channels` is the width of x_t and of the predicted field.
struct VFConfig {
    int layers = 4;
    int dim = 48;
    int heads = 4;
    int ffn_dim = 96;
    int in_channels = 16;
    int out_channels = 8;
    int cond_dim = 6;
    bool use_alibi = true;
    bool use_skips = true;
    bool use_conv_embed = true;

    void validate() const {
        if (layers < 2) throw RangeError("VFConfig: layers must be >= 2");
        if (use_skips && layers % 2 != 0) {
            throw RangeError("VFConfig: layers must be even when use_skips is set");
        }
        if (dim < 2 || dim % 2 != 0) throw RangeError("VFConfig: dim must be even and >= 2");
        if (heads < 1 || dim % heads != 0) {
            throw RangeError("VFConfig: dim must be divisible by heads");
        }
        if (ffn_dim < 1) throw RangeError("VFConfig: ffn_dim must be positive");
        if (out_channels < 1 || in_channels <= out_channels) {
            throw RangeError("VFConfig: need in_channels > out_channels >= 1");
        }
        if (cond_dim < 1) throw RangeError("VFConfig: cond_dim must be positive");
    }

    int head_dim() const { return dim / heads; }
    int ctx_channels() const { return in_channels - out_channels; }

    bool operator==(const VFConfig&) const = default;
};

namespace vf {

constexpr double kLayerNormEps = 1e-5;

/// ALiBi slope for head h (0-based): 2^(-8(h+1)/heads).
inline double alibi_slope(int head, int heads) {
    return std::pow(2.0, -8.0 * static_cast<double>(head + 1) / heads);
}

/// Symmetric bias matrix b_ij = -slope * |i - j|.
template <class T>
TensorT<T> alibi_bias(std::size_t length, double slope) {
    TensorT<T> b({length, length});
    for (std::size_t i = 0; i < length; ++i) {
        for (std::size_t j = 0; j < length; ++j) {
            const double d = i > j ? static_cast<double>(i - j) : static_cast<double>(j - i);
            b.at(i, j) = static_cast<T>(-slope * d);
        }
    }
    return b;
}

/// Log-spaced sin/cos features of the flow time t in [0, 1].
template <class T>
TensorT<T> time_features(T t, int dim) {
    TensorT<T> f({1, static_cast<std::size_t>(dim)});
    const int half = dim / 2;
    for (int i = 0; i < half; ++i) {
        const double w = std::exp(std::log(100.0) * static_cast<double>(i) / half);
        f.at(0, static_cast<std::size_t>(2 * i)) = static_cast<T>(std::sin(w * static_cast<double>(t)));
        f.at(0, static_cast<std::size_t>(2 * i + 1)) = static_cast<T>(std::cos(w * static_cast<double>(t)));
    }
    return f;
}

/// 0-based index of the lower block whose saved output block `l` consumes.
inline int skip_partner(int l, int layers) { return layers - 1 - l; }

}  // namespace vf

/// Indices into the parameter list for one transformer block.
struct BlockLayout {
    int ln1_g, ln1_b;
    int wq, bq, wk, bk, wv, bv, wo, bo;
    int lnc_g, lnc_b;
    int cwq, cbq, cwk, cbk, cwv, cbv, cwo, cbo;
    int ln2_g, ln2_b;
    int w1, b1, w2, b2;
    int skip_w = -1, skip_b = -1;
};

struct ParamLayout {
    int in_w, in_b;
    int conv_k = -1;
    int time_w, time_b;
    int null_token;
    std::vector<BlockLayout> blocks;
    int out_w, out_b;
};

/// The conditioned vector field v_t(x, x_ctx, cond; theta). Parameters are an
/// ordered list of uniquely named tensors whose shapes are a pure function of
/// the config.
template <class T>
struct VectorFieldModel {
    VFConfig config;
    std::vector<std::pair<std::string, TensorT<T>>> params;
    ParamLayout layout;

    const TensorT<T>& param(std::string_view name) const {
        for (const auto& [n, t] : params) {
            if (n == name) return t;
        }
        throw UsageError("VectorFieldModel: no parameter named " + std::string(name));
    }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (const auto& [name, t] : params) n += t.numel();
        return n;
    }

    template <class U>
    VectorFieldModel<U> cast() const {
        VectorFieldModel<U> out;
        out.config = config;
        out.layout = layout;
        out.params.reserve(params.size());
        for (const auto& [n, t] : params) out.params.emplace_back(n, t.template cast<U>());
        return out;
    }
};

namespace detail {

template <class T>
struct ParamBuilder {
    VectorFieldModel<T>& model;
    Rng& rng;

    int glorot(const std::string& name, std::size_t fan_in, std::size_t fan_out,
               std::vector<std::size_t> shape) {
        TensorT<T> t(std::move(shape));
        const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (std::size_t i = 0; i < t.numel(); ++i) {
            t.at(i) = static_cast<T>(rng.uniform(-a, a));
        }
        model.params.emplace_back(name, std::move(t));
        return static_cast<int>(model.params.size() - 1);
    }

    int linear_w(const std::string& name, std::size_t in, std::size_t out) {
        return glorot(name, in, out, {in, out});
    }

    int constant(const std::string& name, std::vector<std::size_t> shape, T value) {
        model.params.emplace_back(name, TensorT<T>::full(std::move(shape), value));
        return static_cast<int>(model.params.size() - 1);
    }
};

}  // namespace detail

/// Deterministic initialization: linear layers scaled-uniform, layer-norm
/// gains one, biases zero, conv kernel zero (identity residual at init).
template <class T>
VectorFieldModel<T> init_vector_field(const VFConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    VectorFieldModel<T> m;
    m.config = cfg;
    Rng root(seed);
    Rng rng = root.fork("vf_init");
    detail::ParamBuilder<T> b{m, rng};
    const auto dim = static_cast<std::size_t>(cfg.dim);
    const auto ffn = static_cast<std::size_t>(cfg.ffn_dim);
    const auto cdim = static_cast<std::size_t>(cfg.cond_dim);

    ParamLayout& L = m.layout;
    L.in_w = b.linear_w("in.w", static_cast<std::size_t>(cfg.in_channels), dim);
    L.in_b = b.constant("in.b", {dim}, T(0));
    if (cfg.use_conv_embed) L.conv_k = b.constant("conv.k", {3, dim}, T(0));
    L.time_w = b.linear_w("time.w", dim, dim);
    L.time_b = b.constant("time.b", {dim}, T(0));
    L.null_token = b.glorot("null_token", 1, cdim, {1, cdim});

    for (int l = 0; l < cfg.layers; ++l) {
        const std::string p = "blocks." + std::to_string(l) + ".";
        BlockLayout bl;
        bl.ln1_g = b.constant(p + "ln1.g", {dim}, T(1));
        bl.ln1_b = b.constant(p + "ln1.b", {dim}, T(0));
        bl.wq = b.linear_w(p + "attn.wq", dim, dim);
        bl.bq = b.constant(p + "attn.bq", {dim}, T(0));
        bl.wk = b.linear_w(p + "attn.wk", dim, dim);
        bl.bk = b.constant(p + "attn.bk", {dim}, T(0));
        bl.wv = b.linear_w(p + "attn.wv", dim, dim);
        bl.bv = b.constant(p + "attn.bv", {dim}, T(0));
        bl.wo = b.linear_w(p + "attn.wo", dim, dim);
        bl.bo = b.constant(p + "attn.bo", {dim}, T(0));
        bl.lnc_g = b.constant(p + "lnc.g", {dim}, T(1));
        bl.lnc_b = b.constant(p + "lnc.b", {dim}, T(0));
        bl.cwq = b.linear_w(p + "cross.wq", dim, dim);
        bl.cbq = b.constant(p + "cross.bq", {dim}, T(0));
        bl.cwk = b.linear_w(p + "cross.wk", cdim, dim);
        bl.cbk = b.constant(p + "cross.bk", {dim}, T(0));
        bl.cwv = b.linear_w(p + "cross.wv", cdim, dim);
        bl.cbv = b.constant(p + "cross.bv", {dim}, T(0));
        bl.cwo = b.linear_w(p + "cross.wo", dim, dim);
        bl.cbo = b.constant(p + "cross.bo", {dim}, T(0));
        bl.ln2_g = b.constant(p + "ln2.g", {dim}, T(1));
        bl.ln2_b = b.constant(p + "ln2.b", {dim}, T(0));
        bl.w1 = b.linear_w(p + "ffn.w1", dim, ffn);
        bl.b1 = b.constant(p + "ffn.b1", {ffn}, T(0));
        bl.w2 = b.linear_w(p + "ffn.w2", ffn, dim);
        bl.b2 = b.constant(p + "ffn.b2", {dim}, T(0));
        if (cfg.use_skips && l >= cfg.layers / 2) {
            bl.skip_w = b.linear_w(p + "skip.w", 2 * dim, dim);
            bl.skip_b = b.constant(p + "skip.b", {dim}, T(0));
        }
        m.layout.blocks.push_back(bl);
    }
    L.out_w = b.linear_w("out.w", dim, static_cast<std::size_t>(cfg.out_channels));
    L.out_b = b.constant("out.b", {static_cast<std::size_t>(cfg.out_channels)}, T(0));
    return m;
}

/// Model parameters registered as leaves on a tape, in parameter-list order.
template <class T>
struct TapeParams {
    std::vector<typename Tape<T>::Id> ids;
};

template <class T>
TapeParams<T> register_params(Tape<T>& tape, const VectorFieldModel<T>& model,
                              bool with_grad) {
    TapeParams<T> tp;
    tp.ids.reserve(model.params.size());
    for (const auto& [name, t] : model.params) {
        tp.ids.push_back(with_grad ? tape.leaf_grad(t) : tape.leaf(t));
    }
    return tp;
}

namespace detail {

template <class T>
using TapeId = typename Tape<T>::Id;

template <class T>
TapeId<T> linear(Tape<T>& tape, TapeId<T> x, TapeId<T> w, TapeId<T> bias) {
    TapeId<T> y = tape.matmul(x, w);
    return tape.add(y, tape.broadcast_rows(bias, tape.val(y).rows()));
}

/// Multi-head scaled-dot attention over precomputed q/k/v, optional additive
/// score bias per head (self-attention ALiBi); cross-attention passes none.
template <class T>
TapeId<T> mh_attention(Tape<T>& tape, TapeId<T> q, TapeId<T> k, TapeId<T> v,
                       int heads, const std::vector<TapeId<T>>& score_bias) {
    const std::size_t dim = tape.val(q).cols();
    const std::size_t hd = dim / static_cast<std::size_t>(heads);
    const T inv_sqrt_hd = static_cast<T>(1.0 / std::sqrt(static_cast<double>(hd)));
    TapeId<T> merged = -1;
    for (int h = 0; h < heads; ++h) {
        const std::size_t c0 = static_cast<std::size_t>(h) * hd;
        TapeId<T> qh = tape.slice_cols(q, c0, c0 + hd);
        TapeId<T> kh = tape.slice_cols(k, c0, c0 + hd);
        TapeId<T> vh = tape.slice_cols(v, c0, c0 + hd);
        TapeId<T> scores = tape.scale(tape.matmul_nt(qh, kh), inv_sqrt_hd);
        if (!score_bias.empty()) scores = tape.add(scores, score_bias[static_cast<std::size_t>(h)]);
        TapeId<T> oh = tape.matmul(tape.softmax_rows(scores), vh);
        merged = (h == 0) ? oh : tape.concat_cols(merged, oh);
    }
    return merged;
}

}  // namespace detail

/// Records the full vector-field computation on `tape` and returns the node
/// holding the [L x out_channels] field estimate.
///
/// Structure: input projection of [x_t || ctx] plus a learned projection of
/// sinusoidal time features broadcast to all frames (and an optional residual
/// depthwise conv); then `layers` pre-norm blocks of self-attention with
/// symmetric ALiBi bias, cross-attention over the condition tokens, and a
/// gelu FFN. With use_skips, block l in the upper half first merges its input
/// with the saved output of block layers-1-l through a projection.
template <class T>
typename Tape<T>::Id vf_forward(Tape<T>& tape, const VectorFieldModel<T>& model,
                                const TapeParams<T>& tp,
                                typename Tape<T>::Id x_in,
                                typename Tape<T>::Id ctx,
                                const CondTokensT<T>& cond, T t) {
    using Id = typename Tape<T>::Id;
    const VFConfig& cfg = model.config;
    const ParamLayout& lay = model.layout;
    const std::size_t L = tape.val(x_in).rows();

    if (!(t >= T(0) && t <= T(1))) throw RangeError("vf_forward: t must be in [0, 1]");
    if (tape.val(x_in).cols() != static_cast<std::size_t>(cfg.out_channels)) {
        throw ShapeError("vf_forward: x_t has wrong channel count");
    }
    if (tape.val(ctx).rows() != L ||
        tape.val(ctx).cols() != static_cast<std::size_t>(cfg.ctx_channels())) {
        throw ShapeError("vf_forward: context features have wrong shape");
    }
    if (!cond.is_null &&
        cond.tokens.cols() != static_cast<std::size_t>(cfg.cond_dim)) {
        throw ShapeError("vf_forward: condition tokens have wrong width");
    }

    const auto P = [&](int idx) { return tp.ids[static_cast<std::size_t>(idx)]; };

    Id x = detail::linear(tape, tape.concat_cols(x_in, ctx), P(lay.in_w), P(lay.in_b));
    if (cfg.use_conv_embed) x = tape.add(x, tape.dwconv3(x, P(lay.conv_k)));

    Id tfeat = tape.leaf(vf::time_features(t, cfg.dim));
    Id tproj = detail::linear(tape, tfeat, P(lay.time_w), P(lay.time_b));
    Id ones = tape.leaf(TensorT<T>::full({L, 1}, T(1)));
    x = tape.add(x, tape.matmul(ones, tproj));

    Id cond_tokens = cond.is_null ? P(lay.null_token) : tape.leaf(cond.tokens);

    std::vector<Id> saved;
    for (int l = 0; l < cfg.layers; ++l) {
        const BlockLayout& bl = lay.blocks[static_cast<std::size_t>(l)];
        if (cfg.use_skips && l >= cfg.layers / 2) {
            Id lower = saved[static_cast<std::size_t>(vf::skip_partner(l, cfg.layers))];
            x = detail::linear(tape, tape.concat_cols(x, lower), P(bl.skip_w), P(bl.skip_b));
        }

        Id a = tape.layer_norm_rows(x, P(bl.ln1_g), P(bl.ln1_b), T(vf::kLayerNormEps));
        Id q = detail::linear(tape, a, P(bl.wq), P(bl.bq));
        Id k = detail::linear(tape, a, P(bl.wk), P(bl.bk));
        Id v = detail::linear(tape, a, P(bl.wv), P(bl.bv));
        std::vector<Id> bias;
        if (cfg.use_alibi) {
            bias.reserve(static_cast<std::size_t>(cfg.heads));
            for (int h = 0; h < cfg.heads; ++h) {
                bias.push_back(tape.leaf(vf::alibi_bias<T>(L, vf::alibi_slope(h, cfg.heads))));
            }
        }
        Id attn = detail::mh_attention(tape, q, k, v, cfg.heads, bias);
        x = tape.add(x, detail::linear(tape, attn, P(bl.wo), P(bl.bo)));

        Id c = tape.layer_norm_rows(x, P(bl.lnc_g), P(bl.lnc_b), T(vf::kLayerNormEps));
        Id cq = detail::linear(tape, c, P(bl.cwq), P(bl.cbq));
        Id ck = detail::linear(tape, cond_tokens, P(bl.cwk), P(bl.cbk));
        Id cv = detail::linear(tape, cond_tokens, P(bl.cwv), P(bl.cbv));
        Id cross = detail::mh_attention(tape, cq, ck, cv, cfg.heads, {});
        x = tape.add(x, detail::linear(tape, cross, P(bl.cwo), P(bl.cbo)));

        Id f = tape.layer_norm_rows(x, P(bl.ln2_g), P(bl.ln2_b), T(vf::kLayerNormEps));
        f = tape.gelu(detail::linear(tape, f, P(bl.w1), P(bl.b1)));
        f = detail::linear(tape, f, P(bl.w2), P(bl.b2));
        x = tape.add(x, f);

        if (cfg.use_skips && l < cfg.layers / 2) saved.push_back(x);
    }

    return detail::linear(tape, x, P(lay.out_w), P(lay.out_b));
}

/// Convenience inference entry point: records on a throwaway tape.
template <class T>
TensorT<T> vf_apply(const VectorFieldModel<T>& model, const TensorT<T>& x_t,
                    const TensorT<T>& ctx, const CondTokensT<T>& cond, T t) {
    Tape<T> tape;
    TapeParams<T> tp = register_params(tape, model, /*with_grad=*/false);
    auto out = vf_forward(tape, model, tp, tape.leaf(x_t), tape.leaf(ctx), cond, t);
    return tape.val(out);
}

}  // namespace cfm
