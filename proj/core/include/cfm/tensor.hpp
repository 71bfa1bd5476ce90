#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "cfm/errors.hpp"

namespace cfm {

/// Dense row-major tensor of rank 1 or 2 (plus rank-0 scalars produced by
/// reductions). Immutable shape; element storage is freely writable until the
/// tensor is handed to a Tape.
template <class T>
class TensorT {
public:
    TensorT() = default;

    explicit TensorT(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), data_(checked_numel(shape_), T(0)) {}

    TensorT(std::vector<std::size_t> shape, std::vector<T> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (checked_numel(shape_) != data_.size()) {
            throw ShapeError("tensor: data size does not match shape");
        }
    }

    static TensorT zeros(std::vector<std::size_t> shape) { return TensorT(std::move(shape)); }

    static TensorT full(std::vector<std::size_t> shape, T value) {
        TensorT t(std::move(shape));
        for (auto& v : t.data_) v = value;
        return t;
    }

    static TensorT scalar(T value) { return TensorT({1}, {value}); }

    /// Row-major matrix from nested initializer lists.
    static TensorT matrix(std::initializer_list<std::initializer_list<T>> rows) {
        const std::size_t r = rows.size();
        const std::size_t c = r ? rows.begin()->size() : 0;
        TensorT t({r, c});
        std::size_t i = 0;
        for (const auto& row : rows) {
            if (row.size() != c) throw ShapeError("tensor: ragged initializer");
            for (T v : row) t.data_[i++] = v;
        }
        return t;
    }

    static TensorT vector(std::initializer_list<T> vals) {
        return TensorT({vals.size()}, std::vector<T>(vals));
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t numel() const { return data_.size(); }
    /// True for a default-constructed tensor (used as an "absent" marker).
    bool empty() const { return data_.empty(); }

    std::size_t rows() const {
        require_rank(2, "rows");
        return shape_[0];
    }
    std::size_t cols() const {
        require_rank(2, "cols");
        return shape_[1];
    }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& storage() { return data_; }
    const std::vector<T>& storage() const { return data_; }

    T& at(std::size_t i) { return data_[i]; }
    T at(std::size_t i) const { return data_[i]; }
    T& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    T at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

    bool same_shape(const TensorT& o) const { return shape_ == o.shape_; }

    bool all_finite() const {
        for (T v : data_) {
            if (!std::isfinite(static_cast<double>(v))) return false;
        }
        return true;
    }

    template <class U>
    TensorT<U> cast() const {
        TensorT<U> out(shape_);
        for (std::size_t i = 0; i < data_.size(); ++i) {
            out.at(i) = static_cast<U>(data_[i]);
        }
        return out;
    }

    std::string shape_str() const {
        std::ostringstream os;
        os << "[";
        for (std::size_t i = 0; i < shape_.size(); ++i) {
            os << (i ? "x" : "") << shape_[i];
        }
        os << "]";
        return os.str();
    }

private:
    static std::size_t checked_numel(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t d : shape) {
            if (d == 0) throw ShapeError("tensor: zero extent");
            n *= d;
        }
        return shape.empty() ? 1 : n;
    }

    void require_rank(std::size_t r, const char* what) const {
        if (shape_.size() != r) {
            throw ShapeError(std::string("tensor: ") + what + " requires rank " +
                             std::to_string(r) + ", have " + shape_str());
        }
    }

    std::vector<std::size_t> shape_;
    std::vector<T> data_;
};

using Tensor = TensorT<float>;
using Tensor64 = TensorT<double>;

}  // namespace cfm
