#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cfm/tensor.hpp"

namespace cfm {

/// Gaussian sufficient statistics of an embedded sample set.
struct GaussianStats {
    std::vector<double> mean;            // D
    std::vector<double> cov;             // D x D row-major, symmetric
    std::size_t count = 0;
    std::size_t dim = 0;

    double cov_at(std::size_t i, std::size_t j) const { return cov[i * dim + j]; }
};

/// Sample mean and unbiased covariance with an unconditional 1e-6 I
/// shrinkage term.
GaussianStats gaussian_stats(const std::vector<std::vector<double>>& samples);

/// Frechet distance between Gaussian fits:
/// |mu_a - mu_b|^2 + Tr(Cov_a + Cov_b - 2 (Cov_a Cov_b)^{1/2}),
/// with the cross term computed from the eigendecomposition of
/// Cov_a^{1/2} Cov_b Cov_a^{1/2} and negative eigenvalues clamped to zero.
double frechet(const GaussianStats& a, const GaussianStats& b);

/// Embedding stand-in: per-channel mean, per-channel std, and per-channel
/// dominant periodogram magnitude, concatenated to a 3C vector.
std::vector<double> pooled_features(const Tensor& seq);

/// Cosine similarity of pooled features; zero-norm inputs give 0.
double context_coherence(const Tensor& gen_segment, const Tensor& ctx_segment);

/// CSV with a header row and %.6g floats.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add_row(std::vector<std::string> cells) { rows.push_back(std::move(cells)); }
    std::string to_string() const;
    void write(const std::string& path) const;
};

std::string format_sig6(double v);

}  // namespace cfm
