#pragma once

#include "cfm/errors.hpp"
#include "cfm/tensor.hpp"

namespace cfm {

/// Encoded description tokens conditioning the vector field, [n_tokens x
/// cond_dim]. `is_null` marks the dropped/unconditional case; the model then
/// substitutes its learned null token (a single-token sequence).
template <class T>
struct CondTokensT {
    TensorT<T> tokens;
    bool is_null = false;

    CondTokensT() : is_null(true) {}

    explicit CondTokensT(TensorT<T> toks) : tokens(std::move(toks)) {
        if (tokens.rank() != 2 || tokens.rows() < 1) {
            throw ShapeError("CondTokens: need [n_tokens x cond_dim] with n_tokens >= 1");
        }
    }

    static CondTokensT null_cond() { return CondTokensT(); }

    std::size_t n_tokens() const { return is_null ? 1 : tokens.rows(); }
};

using CondTokens = CondTokensT<float>;

}  // namespace cfm
