#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

#include <Eigen/Dense>

#include "cfm/errors.hpp"
#include "cfm/tensor.hpp"

namespace cfm {

namespace detail {

template <class T>
using EMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using EMap = Eigen::Map<EMat<T>>;
template <class T>
using ECMap = Eigen::Map<const EMat<T>>;

template <class T>
ECMap<T> cmap(const TensorT<T>& t) {
    return ECMap<T>(t.data(), static_cast<Eigen::Index>(t.rows()),
                    static_cast<Eigen::Index>(t.cols()));
}

template <class T>
EMap<T> map(TensorT<T>& t) {
    return EMap<T>(t.data(), static_cast<Eigen::Index>(t.rows()),
                   static_cast<Eigen::Index>(t.cols()));
}

}  // namespace detail

/// A @ B for rank-2 operands.
template <class T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
        throw ShapeError("matmul: incompatible shapes " + a.shape_str() + " x " +
                         b.shape_str());
    }
    TensorT<T> out({a.rows(), b.cols()});
    detail::map(out).noalias() = detail::cmap(a) * detail::cmap(b);
    return out;
}

/// A @ B^T; B is given as [n x k] with k matching A's columns.
template <class T>
TensorT<T> matmul_nt(const TensorT<T>& a, const TensorT<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.cols()) {
        throw ShapeError("matmul_nt: incompatible shapes " + a.shape_str() +
                         " x " + b.shape_str() + "^T");
    }
    TensorT<T> out({a.rows(), b.rows()});
    detail::map(out).noalias() = detail::cmap(a) * detail::cmap(b).transpose();
    return out;
}

namespace detail {

// Equal shapes, or either side a single element treated as a scalar.
template <class T>
void check_broadcast(const TensorT<T>& a, const TensorT<T>& b, const char* op) {
    if (a.same_shape(b) || a.numel() == 1 || b.numel() == 1) return;
    throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_str() +
                     " vs " + b.shape_str());
}

template <class T, class F>
TensorT<T> binary_broadcast(const TensorT<T>& a, const TensorT<T>& b, F f,
                            const char* name) {
    check_broadcast(a, b, name);
    if (a.numel() == 1 && b.numel() != 1) {
        TensorT<T> out(b.shape());
        const T s = a.at(0);
        for (std::size_t i = 0; i < b.numel(); ++i) out.at(i) = f(s, b.at(i));
        return out;
    }
    TensorT<T> out(a.shape());
    if (b.numel() == 1 && a.numel() != 1) {
        const T s = b.at(0);
        for (std::size_t i = 0; i < a.numel(); ++i) out.at(i) = f(a.at(i), s);
    } else {
        for (std::size_t i = 0; i < a.numel(); ++i) out.at(i) = f(a.at(i), b.at(i));
    }
    return out;
}

}  // namespace detail

template <class T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
    return detail::binary_broadcast(a, b, [](T x, T y) { return x + y; }, "add");
}

template <class T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
    return detail::binary_broadcast(a, b, [](T x, T y) { return x - y; }, "sub");
}

template <class T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
    return detail::binary_broadcast(a, b, [](T x, T y) { return x * y; }, "mul");
}

template <class T>
TensorT<T> scale(const TensorT<T>& a, T s) {
    TensorT<T> out(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) out.at(i) = a.at(i) * s;
    return out;
}

template <class T>
T gelu_scalar(T x) {
    // Exact form: x * Phi(x).
    const T phi = T(0.5) * (T(1) + std::erf(x * T(0.7071067811865475244)));
    return x * phi;
}

template <class T>
T gelu_grad_scalar(T x) {
    const T cdf = T(0.5) * (T(1) + std::erf(x * T(0.7071067811865475244)));
    const T pdf = T(0.3989422804014326779) * std::exp(T(-0.5) * x * x);
    return cdf + x * pdf;
}

template <class T>
TensorT<T> gelu(const TensorT<T>& a) {
    TensorT<T> out(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) out.at(i) = gelu_scalar(a.at(i));
    return out;
}

/// Row-wise softmax with max subtraction.
template <class T>
TensorT<T> softmax_rows(const TensorT<T>& x) {
    if (x.rank() != 2) throw ShapeError("softmax_rows: rank-2 input required");
    const std::size_t rows = x.rows(), cols = x.cols();
    TensorT<T> out(x.shape());
    for (std::size_t i = 0; i < rows; ++i) {
        T mx = x.at(i, 0);
        for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, x.at(i, j));
        T sum = T(0);
        for (std::size_t j = 0; j < cols; ++j) {
            const T e = std::exp(x.at(i, j) - mx);
            out.at(i, j) = e;
            sum += e;
        }
        const T inv = T(1) / sum;
        for (std::size_t j = 0; j < cols; ++j) out.at(i, j) *= inv;
    }
    return out;
}

/// Normalizes each row over its columns, then applies gain and bias.
/// Writes per-row mean and 1/sqrt(var+eps) to the out params when non-null.
template <class T>
TensorT<T> layer_norm_rows(const TensorT<T>& x, const TensorT<T>& gain,
                           const TensorT<T>& bias, T eps,
                           TensorT<T>* mean_out = nullptr,
                           TensorT<T>* rstd_out = nullptr) {
    if (x.rank() != 2) throw ShapeError("layer_norm: rank-2 input required");
    const std::size_t rows = x.rows(), cols = x.cols();
    if (gain.numel() != cols || bias.numel() != cols) {
        throw ShapeError("layer_norm: gain/bias must have one entry per column");
    }
    TensorT<T> out(x.shape());
    TensorT<T> mean({rows});
    TensorT<T> rstd({rows});
    for (std::size_t i = 0; i < rows; ++i) {
        T mu = T(0);
        for (std::size_t j = 0; j < cols; ++j) mu += x.at(i, j);
        mu /= static_cast<T>(cols);
        T var = T(0);
        for (std::size_t j = 0; j < cols; ++j) {
            const T d = x.at(i, j) - mu;
            var += d * d;
        }
        var /= static_cast<T>(cols);
        const T r = T(1) / std::sqrt(var + eps);
        mean.at(i) = mu;
        rstd.at(i) = r;
        for (std::size_t j = 0; j < cols; ++j) {
            out.at(i, j) = (x.at(i, j) - mu) * r * gain.at(j) + bias.at(j);
        }
    }
    if (mean_out) *mean_out = std::move(mean);
    if (rstd_out) *rstd_out = std::move(rstd);
    return out;
}

/// Spec-level vector form of layer_norm.
template <class T>
TensorT<T> layer_norm(const TensorT<T>& x, const TensorT<T>& gain,
                      const TensorT<T>& bias, T eps) {
    if (x.rank() != 1) throw ShapeError("layer_norm: rank-1 input required");
    TensorT<T> m({1, x.numel()}, x.storage());
    TensorT<T> out = layer_norm_rows(m, gain, bias, eps);
    return TensorT<T>({x.numel()}, std::move(out.storage()));
}

template <class T>
TensorT<T> concat_cols(const TensorT<T>& a, const TensorT<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.rows() != b.rows()) {
        throw ShapeError("concat_cols: row counts differ, " + a.shape_str() +
                         " vs " + b.shape_str());
    }
    TensorT<T> out({a.rows(), a.cols() + b.cols()});
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) out.at(i, j) = a.at(i, j);
        for (std::size_t j = 0; j < b.cols(); ++j) out.at(i, a.cols() + j) = b.at(i, j);
    }
    return out;
}

template <class T>
TensorT<T> slice_cols(const TensorT<T>& x, std::size_t c0, std::size_t c1) {
    if (x.rank() != 2 || c0 >= c1 || c1 > x.cols()) {
        throw ShapeError("slice_cols: bad bounds");
    }
    TensorT<T> out({x.rows(), c1 - c0});
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = c0; j < c1; ++j) out.at(i, j - c0) = x.at(i, j);
    }
    return out;
}

template <class T>
TensorT<T> broadcast_rows(const TensorT<T>& v, std::size_t rows) {
    if (v.rank() != 1) throw ShapeError("broadcast_rows: rank-1 input required");
    TensorT<T> out({rows, v.numel()});
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < v.numel(); ++j) out.at(i, j) = v.at(j);
    }
    return out;
}

/// Depthwise length-3 temporal convolution with zero padding.
/// x: [L x C], kernel: [3 x C].
template <class T>
TensorT<T> dwconv3(const TensorT<T>& x, const TensorT<T>& k) {
    if (x.rank() != 2 || k.rank() != 2 || k.rows() != 3 || k.cols() != x.cols()) {
        throw ShapeError("dwconv3: kernel must be [3 x C] matching input columns");
    }
    const std::size_t L = x.rows(), C = x.cols();
    TensorT<T> out({L, C});
    for (std::size_t l = 0; l < L; ++l) {
        for (std::size_t c = 0; c < C; ++c) {
            T acc = k.at(1, c) * x.at(l, c);
            if (l > 0) acc += k.at(0, c) * x.at(l - 1, c);
            if (l + 1 < L) acc += k.at(2, c) * x.at(l + 1, c);
            out.at(l, c) = acc;
        }
    }
    return out;
}

/// Mean of squared entries, as a scalar tensor.
template <class T>
TensorT<T> mean_sq(const TensorT<T>& x) {
    T acc = T(0);
    for (std::size_t i = 0; i < x.numel(); ++i) acc += x.at(i) * x.at(i);
    return TensorT<T>::scalar(acc / static_cast<T>(x.numel()));
}

}  // namespace cfm
