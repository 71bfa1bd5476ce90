#include "cfm/synthdata.hpp"

#include <cmath>

namespace cfm {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

CondTokens make_cond_tokens(const DataSpec& spec, int class_id, double style) {
    const auto cd = static_cast<std::size_t>(spec.cond_dim());
    Tensor toks({2, cd});
    toks.at(0, static_cast<std::size_t>(class_id)) = 1.0f;
    toks.at(1, static_cast<std::size_t>(spec.n_classes)) = 1.0f;
    toks.at(1, static_cast<std::size_t>(spec.n_classes) + 1) = static_cast<float>(style);
    return CondTokens(std::move(toks));
}

Tensor class_projection(const DataSpec& spec, int class_id) {
    const auto Ce = static_cast<std::size_t>(spec.acoustic_dim);
    const auto Ch = static_cast<std::size_t>(spec.semantic_dim);
    Rng rng = Rng(spec.projection_seed).fork("projection");
    const double base_scale = 1.0 / std::sqrt(static_cast<double>(Ch));
    const double gain = 1.0 + 0.15 * static_cast<double>(class_id);
    Tensor w({Ce, Ch});
    for (std::size_t i = 0; i < w.numel(); ++i) {
        w.at(i) = static_cast<float>(rng.normal() * base_scale * gain);
    }
    return w;
}

Example gen_example(const DataSpec& spec, int class_id, Rng& rng) {
    spec.validate();
    if (class_id < 0 || class_id >= spec.n_classes) {
        throw RangeError("gen_example: class id out of range");
    }
    const auto M = static_cast<std::size_t>(spec.semantic_len);
    const auto N = static_cast<std::size_t>(spec.acoustic_len);
    const auto Ch = static_cast<std::size_t>(spec.semantic_dim);

    Example ex;
    ex.class_id = class_id;
    ex.style = rng.uniform();
    ex.cond = make_cond_tokens(spec, class_id, ex.style);

    const double amp = 0.5 + ex.style;
    const double w = spec.omega(class_id);
    std::vector<double> phase(Ch);
    for (std::size_t d = 0; d < Ch; ++d) phase[d] = rng.uniform(0.0, kTwoPi);

    ex.h = Tensor({M, Ch});
    for (std::size_t m = 0; m < M; ++m) {
        for (std::size_t d = 0; d < Ch; ++d) {
            double v = amp * std::sin(w * static_cast<double>(m) + phase[d]);
            if (spec.sigma_h > 0.0) v += spec.sigma_h * rng.normal();
            ex.h.at(m, d) = static_cast<float>(v);
        }
    }

    const Tensor proj = class_projection(spec, class_id);
    Tensor h_aligned = interpolate(ex.h, N);
    ex.e = matmul_nt(h_aligned, proj);
    if (spec.sigma_e > 0.0) {
        for (std::size_t i = 0; i < ex.e.numel(); ++i) {
            ex.e.at(i) += static_cast<float>(spec.sigma_e * rng.normal());
        }
    }
    return ex;
}

std::pair<int, std::vector<double>> oracle_classify(const Tensor& seq,
                                                    const DataSpec& spec,
                                                    double omega_scale) {
    if (seq.rank() != 2 || seq.rows() < 8) {
        throw RangeError("oracle_classify: need at least 8 frames");
    }
    const std::size_t L = seq.rows(), C = seq.cols();
    std::vector<double> scores(static_cast<std::size_t>(spec.n_classes), 0.0);
    for (int c = 0; c < spec.n_classes; ++c) {
        const double w = spec.omega(c) * omega_scale;
        double energy = 0.0;
        for (std::size_t d = 0; d < C; ++d) {
            double re = 0.0, im = 0.0;
            for (std::size_t l = 0; l < L; ++l) {
                const double v = static_cast<double>(seq.at(l, d));
                re += v * std::cos(w * static_cast<double>(l));
                im += v * std::sin(w * static_cast<double>(l));
            }
            energy += re * re + im * im;
        }
        scores[static_cast<std::size_t>(c)] =
            energy / (static_cast<double>(L) * static_cast<double>(L));
    }
    int best = 0;
    for (int c = 1; c < spec.n_classes; ++c) {
        if (scores[static_cast<std::size_t>(c)] > scores[static_cast<std::size_t>(best)]) {
            best = c;
        }
    }
    return {best, std::move(scores)};
}

std::vector<Example> gen_split(const DataSpec& spec, std::uint64_t seed,
                               std::string_view split, int count) {
    spec.validate();
    if (count < 0) throw RangeError("gen_split: negative count");
    std::vector<Example> out;
    out.reserve(static_cast<std::size_t>(count));
    Rng base = Rng(seed).fork(split);
    for (int i = 0; i < count; ++i) {
        Rng rng = base.fork("example", static_cast<std::uint64_t>(i));
        out.push_back(gen_example(spec, i % spec.n_classes, rng));
    }
    return out;
}

}  // namespace cfm
