#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cfm/ops.hpp"
#include "cfm/tensor.hpp"

namespace cfm {

/// Recorded computation graph. Nodes are appended in execution order, so the
/// tape is topologically sorted by construction and acyclic; every non-leaf
/// value is produced by exactly one op. A tape is single-owner: record a
/// forward pass, call backward() once, read gradients, then clear().
template <class T>
class Tape {
public:
    using Id = int;

    enum class Op {
        Leaf,
        Matmul,
        MatmulNT,
        Add,
        Sub,
        Mul,
        Scale,
        Gelu,
        SoftmaxRows,
        LayerNormRows,
        ConcatCols,
        SliceCols,
        BroadcastRows,
        DwConv3,
        MeanSq,
    };

    /// Constant input; no gradient is tracked.
    Id leaf(TensorT<T> value) { return push(Op::Leaf, std::move(value), false); }

    /// Differentiable leaf (parameters, or inputs under a gradient check).
    Id leaf_grad(TensorT<T> value) { return push(Op::Leaf, std::move(value), true); }

    Id matmul(Id a, Id b) {
        TensorT<T> v = cfm::matmul(val(a), val(b));
        return push2(Op::Matmul, std::move(v), a, b);
    }

    Id matmul_nt(Id a, Id b) {
        TensorT<T> v = cfm::matmul_nt(val(a), val(b));
        return push2(Op::MatmulNT, std::move(v), a, b);
    }

    Id add(Id a, Id b) { return push2(Op::Add, cfm::add(val(a), val(b)), a, b); }
    Id sub(Id a, Id b) { return push2(Op::Sub, cfm::sub(val(a), val(b)), a, b); }
    Id mul(Id a, Id b) { return push2(Op::Mul, cfm::mul(val(a), val(b)), a, b); }

    Id scale(Id a, T s) {
        Id id = push2(Op::Scale, cfm::scale(val(a), s), a, -1);
        nodes_[id].scalar = s;
        return id;
    }

    Id gelu(Id a) { return push2(Op::Gelu, cfm::gelu(val(a)), a, -1); }

    Id softmax_rows(Id a) {
        return push2(Op::SoftmaxRows, cfm::softmax_rows(val(a)), a, -1);
    }

    Id layer_norm_rows(Id x, Id gain, Id bias, T eps) {
        TensorT<T> mean, rstd;
        TensorT<T> v = cfm::layer_norm_rows(val(x), val(gain), val(bias), eps,
                                            &mean, &rstd);
        Id id = push3(Op::LayerNormRows, std::move(v), x, gain, bias);
        nodes_[id].scalar = eps;
        nodes_[id].aux0 = std::move(mean);
        nodes_[id].aux1 = std::move(rstd);
        return id;
    }

    Id concat_cols(Id a, Id b) {
        return push2(Op::ConcatCols, cfm::concat_cols(val(a), val(b)), a, b);
    }

    Id slice_cols(Id a, std::size_t c0, std::size_t c1) {
        Id id = push2(Op::SliceCols, cfm::slice_cols(val(a), c0, c1), a, -1);
        nodes_[id].p0 = c0;
        nodes_[id].p1 = c1;
        return id;
    }

    Id broadcast_rows(Id v, std::size_t rows) {
        Id id = push2(Op::BroadcastRows, cfm::broadcast_rows(val(v), rows), v, -1);
        nodes_[id].p0 = rows;
        return id;
    }

    Id dwconv3(Id x, Id kernel) {
        return push2(Op::DwConv3, cfm::dwconv3(val(x), val(kernel)), x, kernel);
    }

    Id mean_sq(Id a) { return push2(Op::MeanSq, cfm::mean_sq(val(a)), a, -1); }

    const TensorT<T>& val(Id id) const { return nodes_[static_cast<std::size_t>(id)].val; }

    /// Gradient of the last backward()'s loss w.r.t. node `id`. Zero tensor
    /// for differentiable nodes the loss does not depend on.
    const TensorT<T>& grad(Id id) const {
        const Node& n = nodes_[static_cast<std::size_t>(id)];
        if (!n.requires_grad) {
            throw UsageError("tape: gradient requested for a non-differentiable node");
        }
        return n.grad;
    }

    std::size_t size() const { return nodes_.size(); }

    bool requires_grad(Id id) const {
        return nodes_[static_cast<std::size_t>(id)].requires_grad;
    }

    /// Reverse sweep from a scalar loss node.
    void backward(Id loss) {
        Node& ln = nodes_[static_cast<std::size_t>(loss)];
        if (ln.val.numel() != 1) {
            throw UsageError("tape: backward requires a scalar loss");
        }
        if (!ln.requires_grad) {
            throw UsageError("tape: loss does not depend on any differentiable leaf");
        }
        for (Node& n : nodes_) {
            if (n.requires_grad) n.grad = TensorT<T>::zeros(n.val.shape());
        }
        ln.grad.at(0) = T(1);
        for (int i = loss; i >= 0; --i) {
            Node& n = nodes_[static_cast<std::size_t>(i)];
            if (!n.requires_grad || n.op == Op::Leaf) continue;
            step_backward(n);
        }
    }

    void clear() { nodes_.clear(); }

    /// Drops every node recorded after the first `n`. Lets a caller keep
    /// leaf registrations (model parameters) while discarding a recorded
    /// forward pass before recording the next one.
    void truncate(std::size_t n) {
        if (n > nodes_.size()) throw UsageError("tape: truncate beyond size");
        nodes_.resize(n);
    }

private:
    struct Node {
        Op op = Op::Leaf;
        Id a = -1, b = -1, c = -1;
        TensorT<T> val;
        TensorT<T> grad;
        TensorT<T> aux0, aux1;  // op-specific saved state (layer norm)
        T scalar = T(0);
        std::size_t p0 = 0, p1 = 0;
        bool requires_grad = false;
    };

    Id push(Op op, TensorT<T> v, bool rg) {
        Node n;
        n.op = op;
        n.val = std::move(v);
        n.requires_grad = rg;
        nodes_.push_back(std::move(n));
        return static_cast<Id>(nodes_.size() - 1);
    }

    Id push2(Op op, TensorT<T> v, Id a, Id b) {
        bool rg = (a >= 0 && nodes_[static_cast<std::size_t>(a)].requires_grad) ||
                  (b >= 0 && nodes_[static_cast<std::size_t>(b)].requires_grad);
        Id id = push(op, std::move(v), rg);
        nodes_[static_cast<std::size_t>(id)].a = a;
        nodes_[static_cast<std::size_t>(id)].b = b;
        return id;
    }

    Id push3(Op op, TensorT<T> v, Id a, Id b, Id c) {
        Id id = push2(op, std::move(v), a, b);
        nodes_[static_cast<std::size_t>(id)].c = c;
        if (c >= 0 && nodes_[static_cast<std::size_t>(c)].requires_grad) {
            nodes_[static_cast<std::size_t>(id)].requires_grad = true;
        }
        return id;
    }

    Node& node(Id id) { return nodes_[static_cast<std::size_t>(id)]; }

    bool wants(Id id) const {
        return id >= 0 && nodes_[static_cast<std::size_t>(id)].requires_grad;
    }

    // Adds g to the gradient of input `id`, reducing over broadcasting if the
    // input was a single-element scalar.
    void accumulate(Id id, const TensorT<T>& g, T sign = T(1)) {
        if (!wants(id)) return;
        Node& n = node(id);
        if (n.val.numel() == 1 && g.numel() != 1) {
            T acc = T(0);
            for (std::size_t i = 0; i < g.numel(); ++i) acc += g.at(i);
            n.grad.at(0) += sign * acc;
            return;
        }
        for (std::size_t i = 0; i < g.numel(); ++i) n.grad.at(i) += sign * g.at(i);
    }

    void step_backward(Node& n) {
        const TensorT<T>& gy = n.grad;
        switch (n.op) {
            case Op::Leaf:
                break;
            case Op::Matmul: {
                // y = A B: dA = gy B^T, dB = A^T gy
                if (wants(n.a)) {
                    TensorT<T> da = cfm::matmul_nt(gy, node(n.b).val);
                    accumulate(n.a, da);
                }
                if (wants(n.b)) {
                    const TensorT<T>& a = node(n.a).val;
                    TensorT<T> db({a.cols(), gy.cols()});
                    detail::map(db).noalias() =
                        detail::cmap(a).transpose() * detail::cmap(gy);
                    accumulate(n.b, db);
                }
                break;
            }
            case Op::MatmulNT: {
                // y = A B^T: dA = gy B, dB = gy^T A
                if (wants(n.a)) accumulate(n.a, cfm::matmul(gy, node(n.b).val));
                if (wants(n.b)) {
                    const TensorT<T>& a = node(n.a).val;
                    TensorT<T> db({gy.cols(), a.cols()});
                    detail::map(db).noalias() =
                        detail::cmap(gy).transpose() * detail::cmap(a);
                    accumulate(n.b, db);
                }
                break;
            }
            case Op::Add:
                accumulate(n.a, gy);
                accumulate(n.b, gy);
                break;
            case Op::Sub:
                accumulate(n.a, gy);
                accumulate(n.b, gy, T(-1));
                break;
            case Op::Mul: {
                if (wants(n.a)) accumulate(n.a, cfm::mul(gy, node(n.b).val));
                if (wants(n.b)) accumulate(n.b, cfm::mul(gy, node(n.a).val));
                break;
            }
            case Op::Scale:
                if (wants(n.a)) accumulate(n.a, cfm::scale(gy, n.scalar));
                break;
            case Op::Gelu: {
                if (wants(n.a)) {
                    const TensorT<T>& x = node(n.a).val;
                    TensorT<T> dx(x.shape());
                    for (std::size_t i = 0; i < x.numel(); ++i) {
                        dx.at(i) = gy.at(i) * gelu_grad_scalar(x.at(i));
                    }
                    accumulate(n.a, dx);
                }
                break;
            }
            case Op::SoftmaxRows: {
                if (wants(n.a)) {
                    const TensorT<T>& y = n.val;
                    TensorT<T> dx(y.shape());
                    for (std::size_t i = 0; i < y.rows(); ++i) {
                        T dot = T(0);
                        for (std::size_t j = 0; j < y.cols(); ++j) {
                            dot += gy.at(i, j) * y.at(i, j);
                        }
                        for (std::size_t j = 0; j < y.cols(); ++j) {
                            dx.at(i, j) = y.at(i, j) * (gy.at(i, j) - dot);
                        }
                    }
                    accumulate(n.a, dx);
                }
                break;
            }
            case Op::LayerNormRows: {
                const TensorT<T>& x = node(n.a).val;
                const TensorT<T>& gain = node(n.b).val;
                const TensorT<T>& mean = n.aux0;
                const TensorT<T>& rstd = n.aux1;
                const std::size_t rows = x.rows(), cols = x.cols();
                TensorT<T> dx, dg, db;
                const bool wx = wants(n.a), wg = wants(n.b), wb = wants(n.c);
                if (wx) dx = TensorT<T>::zeros(x.shape());
                if (wg) dg = TensorT<T>::zeros({cols});
                if (wb) db = TensorT<T>::zeros({cols});
                for (std::size_t i = 0; i < rows; ++i) {
                    const T r = rstd.at(i);
                    T sum_dxh = T(0), sum_dxh_xh = T(0);
                    for (std::size_t j = 0; j < cols; ++j) {
                        const T xh = (x.at(i, j) - mean.at(i)) * r;
                        const T dxh = gy.at(i, j) * gain.at(j);
                        sum_dxh += dxh;
                        sum_dxh_xh += dxh * xh;
                        if (wg) dg.at(j) += gy.at(i, j) * xh;
                        if (wb) db.at(j) += gy.at(i, j);
                    }
                    if (wx) {
                        const T inv_cols = T(1) / static_cast<T>(cols);
                        for (std::size_t j = 0; j < cols; ++j) {
                            const T xh = (x.at(i, j) - mean.at(i)) * r;
                            const T dxh = gy.at(i, j) * gain.at(j);
                            dx.at(i, j) =
                                r * (dxh - inv_cols * sum_dxh - xh * inv_cols * sum_dxh_xh);
                        }
                    }
                }
                if (wx) accumulate(n.a, dx);
                if (wg) accumulate(n.b, dg);
                if (wb) accumulate(n.c, db);
                break;
            }
            case Op::ConcatCols: {
                const std::size_t ca = node(n.a).val.cols();
                if (wants(n.a)) accumulate(n.a, cfm::slice_cols(gy, 0, ca));
                if (wants(n.b)) accumulate(n.b, cfm::slice_cols(gy, ca, gy.cols()));
                break;
            }
            case Op::SliceCols: {
                if (wants(n.a)) {
                    const TensorT<T>& x = node(n.a).val;
                    TensorT<T> dx = TensorT<T>::zeros(x.shape());
                    for (std::size_t i = 0; i < gy.rows(); ++i) {
                        for (std::size_t j = 0; j < gy.cols(); ++j) {
                            dx.at(i, n.p0 + j) = gy.at(i, j);
                        }
                    }
                    accumulate(n.a, dx);
                }
                break;
            }
            case Op::BroadcastRows: {
                if (wants(n.a)) {
                    TensorT<T> dv = TensorT<T>::zeros({gy.cols()});
                    for (std::size_t i = 0; i < gy.rows(); ++i) {
                        for (std::size_t j = 0; j < gy.cols(); ++j) {
                            dv.at(j) += gy.at(i, j);
                        }
                    }
                    accumulate(n.a, dv);
                }
                break;
            }
            case Op::DwConv3: {
                const TensorT<T>& x = node(n.a).val;
                const TensorT<T>& k = node(n.b).val;
                const std::size_t L = x.rows(), C = x.cols();
                if (wants(n.a)) {
                    TensorT<T> dx = TensorT<T>::zeros(x.shape());
                    for (std::size_t l = 0; l < L; ++l) {
                        for (std::size_t c = 0; c < C; ++c) {
                            T acc = k.at(1, c) * gy.at(l, c);
                            if (l + 1 < L) acc += k.at(0, c) * gy.at(l + 1, c);
                            if (l > 0) acc += k.at(2, c) * gy.at(l - 1, c);
                            dx.at(l, c) = acc;
                        }
                    }
                    accumulate(n.a, dx);
                }
                if (wants(n.b)) {
                    TensorT<T> dk = TensorT<T>::zeros({3, C});
                    for (std::size_t l = 0; l < L; ++l) {
                        for (std::size_t c = 0; c < C; ++c) {
                            const T g = gy.at(l, c);
                            dk.at(1, c) += g * x.at(l, c);
                            if (l > 0) dk.at(0, c) += g * x.at(l - 1, c);
                            if (l + 1 < L) dk.at(2, c) += g * x.at(l + 1, c);
                        }
                    }
                    accumulate(n.b, dk);
                }
                break;
            }
            case Op::MeanSq: {
                if (wants(n.a)) {
                    const TensorT<T>& x = node(n.a).val;
                    const T g = gy.at(0) * T(2) / static_cast<T>(x.numel());
                    TensorT<T> dx(x.shape());
                    for (std::size_t i = 0; i < x.numel(); ++i) dx.at(i) = g * x.at(i);
                    accumulate(n.a, dx);
                }
                break;
            }
        }
    }

    std::vector<Node> nodes_;
};

}  // namespace cfm
