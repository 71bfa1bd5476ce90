#pragma once

#include <string>

#include "cfm/errors.hpp"
#include "cfm/ops.hpp"
#include "cfm/tensor.hpp"

namespace cfm {

/// Optimal-transport Gaussian path configuration. The mean of the
/// conditional path is t*x1 and the standard deviation 1-(1-sigma_min)*t,
/// so sigma_min > 0 keeps the target field finite at t = 1.
struct PathParams {
    double sigma_min = 1e-5;

    explicit PathParams(double sm = 1e-5) : sigma_min(sm) {
        if (!(sigma_min > 0.0) || sigma_min > 0.1) {
            throw RangeError("PathParams: sigma_min must be in (0, 0.1]");
        }
    }
};

namespace detail {
template <class T>
void check_time(T t, const char* where) {
    if (!(t >= T(0) && t <= T(1))) {
        throw RangeError(std::string(where) + ": t must be in [0, 1]");
    }
}
}  // namespace detail

/// mu_t(x1) = t * x1.
template <class T>
TensorT<T> path_mean(T t, const TensorT<T>& x1) {
    detail::check_time(t, "path_mean");
    return scale(x1, t);
}

/// sigma_t = 1 - (1 - sigma_min) * t.
template <class T>
T path_std(T t, const PathParams& p) {
    detail::check_time(t, "path_std");
    return T(1) - (T(1) - static_cast<T>(p.sigma_min)) * t;
}

/// Draws the conditional path point x_t = mu_t(x1) + sigma_t * z.
template <class T>
TensorT<T> sample_xt(const TensorT<T>& x1, const TensorT<T>& z, T t,
                     const PathParams& p) {
    if (!x1.same_shape(z)) {
        throw ShapeError("sample_xt: x1 and z must share a shape");
    }
    detail::check_time(t, "sample_xt");
    const T sd = path_std(t, p);
    TensorT<T> out(x1.shape());
    for (std::size_t i = 0; i < x1.numel(); ++i) {
        out.at(i) = t * x1.at(i) + sd * z.at(i);
    }
    return out;
}

/// Closed-form target field of the OT path:
/// u_t(x | x1) = (x1 - (1 - sigma_min) x) / (1 - (1 - sigma_min) t).
template <class T>
TensorT<T> target_field(const TensorT<T>& x, const TensorT<T>& x1, T t,
                        const PathParams& p) {
    if (!x.same_shape(x1)) {
        throw ShapeError("target_field: x and x1 must share a shape");
    }
    detail::check_time(t, "target_field");
    const T k = T(1) - static_cast<T>(p.sigma_min);
    const T denom = T(1) - k * t;
    TensorT<T> out(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) {
        out.at(i) = (x1.at(i) - k * x.at(i)) / denom;
    }
    return out;
}

}  // namespace cfm
