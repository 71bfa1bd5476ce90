#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cfm/cascade.hpp"
#include "cfm/cond.hpp"
#include "cfm/errors.hpp"
#include "cfm/rng.hpp"
#include "cfm/tensor.hpp"

namespace cfm {

/// Synthetic hierarchical data process standing in for (text, semantic,
/// acoustic) triples. Class c is a sinusoid family at frequency
/// omega0 + omega_step * c; acoustic features are a fixed seeded projection
/// of the length-aligned semantic features plus texture noise.
struct DataSpec {
    int n_classes = 4;
    int semantic_len = 32;   // M
    int acoustic_len = 128;  // N
    int semantic_dim = 8;    // C_h
    int acoustic_dim = 16;   // C_e
    double omega0 = 0.3;
    double omega_step = 0.25;
    double sigma_h = 0.05;
    double sigma_e = 0.05;
    std::uint64_t projection_seed = 7;

    void validate() const {
        if (n_classes < 1) throw RangeError("DataSpec: n_classes must be >= 1");
        if (semantic_len < 1 || acoustic_len < semantic_len) {
            throw RangeError("DataSpec: need N >= M >= 1");
        }
        if (semantic_dim < 1 || acoustic_dim < 1) {
            throw RangeError("DataSpec: feature dims must be positive");
        }
        if (omega_step == 0.0) {
            throw RangeError("DataSpec: class frequencies must be distinct");
        }
        if (sigma_h < 0.0 || sigma_e < 0.0) {
            throw RangeError("DataSpec: noise levels must be >= 0");
        }
    }

    double omega(int class_id) const { return omega0 + omega_step * class_id; }

    /// Token width: one-hot class block plus a marker and the style scalar.
    int cond_dim() const { return n_classes + 2; }

    /// Frequency scale from semantic to acoustic frame indices under the
    /// endpoint-preserving interpolation.
    double acoustic_omega_scale() const {
        if (acoustic_len <= 1) return 1.0;
        return static_cast<double>(semantic_len - 1) /
               static_cast<double>(acoustic_len - 1);
    }
};

struct Example {
    int class_id = 0;
    double style = 0.0;
    CondTokens cond;
    Tensor h;  // [M x C_h]
    Tensor e;  // [N x C_e]
};

/// Two condition tokens: [one-hot class | 0 | 0] and [0.. | 1 | style].
CondTokens make_cond_tokens(const DataSpec& spec, int class_id, double style);

/// Seeded class-dependent projection, gain (1 + 0.15 c) times a shared
/// basis with N(0, 1/C_h) entries. Shape [C_e x C_h].
Tensor class_projection(const DataSpec& spec, int class_id);

Example gen_example(const DataSpec& spec, int class_id, Rng& rng);

/// Matched-filter energies at every class frequency (summed per-channel
/// periodogram), argmax class with lowest-id tie break. `omega_scale`
/// rescales the probe frequencies for sequences at the acoustic frame rate.
std::pair<int, std::vector<double>> oracle_classify(const Tensor& seq,
                                                    const DataSpec& spec,
                                                    double omega_scale = 1.0);

/// Deterministic corpus slice: example i uses class i % K and an rng stream
/// derived from (seed, split, i).
std::vector<Example> gen_split(const DataSpec& spec, std::uint64_t seed,
                               std::string_view split, int count);

}  // namespace cfm
