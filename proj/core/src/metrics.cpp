#include "cfm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <Eigen/Dense>

#include "cfm/errors.hpp"

namespace cfm {

GaussianStats gaussian_stats(const std::vector<std::vector<double>>& samples) {
    if (samples.size() < 2) {
        throw UsageError("gaussian_stats: need at least 2 samples");
    }
    const std::size_t n = samples.size();
    const std::size_t d = samples[0].size();
    for (const auto& s : samples) {
        if (s.size() != d) throw ShapeError("gaussian_stats: inconsistent dims");
    }
    GaussianStats g;
    g.count = n;
    g.dim = d;
    g.mean.assign(d, 0.0);
    for (const auto& s : samples) {
        for (std::size_t i = 0; i < d; ++i) g.mean[i] += s[i];
    }
    for (std::size_t i = 0; i < d; ++i) g.mean[i] /= static_cast<double>(n);

    g.cov.assign(d * d, 0.0);
    for (const auto& s : samples) {
        for (std::size_t i = 0; i < d; ++i) {
            const double di = s[i] - g.mean[i];
            for (std::size_t j = i; j < d; ++j) {
                g.cov[i * d + j] += di * (s[j] - g.mean[j]);
            }
        }
    }
    const double inv = 1.0 / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i; j < d; ++j) {
            const double v = g.cov[i * d + j] * inv;
            g.cov[i * d + j] = v;
            g.cov[j * d + i] = v;
        }
        g.cov[i * d + i] += 1e-6;
    }
    return g;
}

namespace {

Eigen::MatrixXd to_eigen(const GaussianStats& g) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(g.dim), static_cast<Eigen::Index>(g.dim));
    for (std::size_t i = 0; i < g.dim; ++i) {
        for (std::size_t j = 0; j < g.dim; ++j) {
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = g.cov_at(i, j);
        }
    }
    return m;
}

// Symmetric PSD square root with negative-eigenvalue clamping. Eigenvalues
// below -1e-6 * trace indicate the input is not a covariance.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    if (es.info() != Eigen::Success) {
        throw NumericalError("frechet: eigendecomposition failed");
    }
    const double tol = -1e-6 * std::max(m.trace(), 1.0);
    Eigen::VectorXd lam = es.eigenvalues();
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
        if (lam(i) < tol) {
            throw NumericalError("frechet: matrix is not PSD within tolerance");
        }
        lam(i) = std::sqrt(std::max(lam(i), 0.0));
    }
    return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double frechet(const GaussianStats& a, const GaussianStats& b) {
    if (a.dim != b.dim) throw ShapeError("frechet: dimension mismatch");
    double mean_term = 0.0;
    for (std::size_t i = 0; i < a.dim; ++i) {
        const double d = a.mean[i] - b.mean[i];
        mean_term += d * d;
    }
    const Eigen::MatrixXd ca = to_eigen(a);
    const Eigen::MatrixXd cb = to_eigen(b);
    const Eigen::MatrixXd sa = psd_sqrt(ca);
    Eigen::MatrixXd inner = sa * cb * sa;
    inner = 0.5 * (inner + inner.transpose());  // symmetrize roundoff

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inner);
    if (es.info() != Eigen::Success) {
        throw NumericalError("frechet: eigendecomposition failed");
    }
    const double tol = -1e-6 * std::max(inner.trace(), 1.0);
    double cross = 0.0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        const double lam = es.eigenvalues()(i);
        if (lam < tol) throw NumericalError("frechet: cross term is not PSD");
        cross += std::sqrt(std::max(lam, 0.0));
    }
    const double fd = mean_term + ca.trace() + cb.trace() - 2.0 * cross;
    return std::max(fd, 0.0);
}

std::vector<double> pooled_features(const Tensor& seq) {
    if (seq.rank() != 2 || seq.rows() < 1) {
        throw ShapeError("pooled_features: non-empty rank-2 sequence required");
    }
    const std::size_t L = seq.rows(), C = seq.cols();
    std::vector<double> out(3 * C, 0.0);
    for (std::size_t c = 0; c < C; ++c) {
        double mean = 0.0;
        for (std::size_t l = 0; l < L; ++l) mean += static_cast<double>(seq.at(l, c));
        mean /= static_cast<double>(L);
        double var = 0.0;
        for (std::size_t l = 0; l < L; ++l) {
            const double d = static_cast<double>(seq.at(l, c)) - mean;
            var += d * d;
        }
        var /= static_cast<double>(L);
        out[c] = mean;
        out[C + c] = std::sqrt(var);

        // dominant periodogram magnitude over non-DC bins
        double peak = 0.0;
        const double two_pi = 6.283185307179586476925286766559;
        for (std::size_t k = 1; k <= L / 2; ++k) {
            double re = 0.0, im = 0.0;
            const double w = two_pi * static_cast<double>(k) / static_cast<double>(L);
            for (std::size_t l = 0; l < L; ++l) {
                const double v = static_cast<double>(seq.at(l, c));
                re += v * std::cos(w * static_cast<double>(l));
                im += v * std::sin(w * static_cast<double>(l));
            }
            const double mag = 2.0 * std::sqrt(re * re + im * im) / static_cast<double>(L);
            peak = std::max(peak, mag);
        }
        out[2 * C + c] = peak;
    }
    return out;
}

double context_coherence(const Tensor& gen_segment, const Tensor& ctx_segment) {
    const std::vector<double> a = pooled_features(gen_segment);
    const std::vector<double> b = pooled_features(ctx_segment);
    if (a.size() != b.size()) throw ShapeError("context_coherence: dim mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    const double v = dot / (std::sqrt(na) * std::sqrt(nb));
    return std::clamp(v, -1.0, 1.0);
}

std::string format_sig6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return std::string(buf);
}

std::string CsvTable::to_string() const {
    std::string out;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) out += ',';
        out += header[i];
    }
    out += '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            out += row[i];
        }
        out += '\n';
    }
    return out;
}

void CsvTable::write(const std::string& path) const {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("csv: cannot open for writing: " + path);
    os << to_string();
    if (!os) throw IoError("csv: write failed: " + path);
}

}  // namespace cfm
