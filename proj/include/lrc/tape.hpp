#pragma once

// Reverse-mode automatic differentiation over a recorded tape.
//
// Each primitive appends one node holding its forward value; backward
// walks the tape once in reverse, accumulating adjoints into every
// node that can influence the root. Nodes are identified by index, so
// topological order is creation order by construction. A tape is
// single-owner; build a fresh one per optimization step.
//
// Subgradient conventions (all deterministic):
//   relu'(0) = 0, abs'(0) = 0, phi'(0) = phi'(1) = 0,
//   max_over_axis routes the adjoint to the lowest index among ties.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "lrc/errors.hpp"
#include "lrc/tensor.hpp"

namespace lrc {

enum class OpKind {
    Leaf,
    SliceReshape,
    MatMul,
    AddBias,
    Add,
    Sub,
    SubColBroadcast,
    Relu,
    Scale,
    Abs,
    Phi,
    Sum,
    Mean,
    Gather,
    MaskFill,
    MaxOverAxis,
    LogSumExp,
    Inner,
};

template <typename T>
class TapeT {
public:
    using Tensor = TensorT<T>;

    // Records a leaf tensor; set requires_grad for parameters.
    int leaf(Tensor v, bool requires_grad = false) {
        Node n;
        n.op = OpKind::Leaf;
        n.value = std::move(v);
        n.needs_grad = requires_grad;
        n.requires_grad_leaf = requires_grad;
        return push(std::move(n));
    }

    // Contiguous range [offset, offset + numel(shape)) of a flat tensor,
    // viewed with the given shape. This is how layer matrices are carved
    // out of the flat parameter vector.
    int slice_reshape(int x, std::size_t offset, std::vector<std::size_t> shape) {
        const Tensor& in = value(x);
        std::size_t n = shape_numel(shape);
        if (in.rank() != 1 || offset + n > in.numel()) {
            throw std::invalid_argument("slice_reshape: range [" + std::to_string(offset) + ", " +
                                        std::to_string(offset + n) + ") does not fit flat tensor of shape " +
                                        shape_str(in.shape));
        }
        Tensor out(std::move(shape),
                   std::vector<T>(in.data.begin() + offset, in.data.begin() + offset + n));
        Node node = unary(OpKind::SliceReshape, x, std::move(out));
        node.offset = offset;
        return push(std::move(node));
    }

    int matmul(int a, int b) {
        const Tensor& A = value(a);
        const Tensor& B = value(b);
        if (A.rank() != 2 || B.rank() != 2 || A.cols() != B.rows()) {
            throw std::invalid_argument("matmul: incompatible shapes " + shape_str(A.shape) + " and " +
                                        shape_str(B.shape));
        }
        Tensor out = Tensor::zeros({A.rows(), B.cols()});
        for (std::size_t i = 0; i < A.rows(); ++i) {
            for (std::size_t j = 0; j < B.cols(); ++j) {
                T acc = 0;
                for (std::size_t k = 0; k < A.cols(); ++k) acc += A.at(i, k) * B.at(k, j);
                out.at(i, j) = acc;
            }
        }
        Node node = binary(OpKind::MatMul, a, b, std::move(out));
        return push(std::move(node));
    }

    // matrix (B x C) + bias (C), broadcast over rows.
    int add_bias(int m, int bias) {
        const Tensor& M = value(m);
        const Tensor& b = value(bias);
        if (M.rank() != 2 || b.rank() != 1 || b.numel() != M.cols()) {
            throw std::invalid_argument("add_bias: incompatible shapes " + shape_str(M.shape) + " and " +
                                        shape_str(b.shape));
        }
        Tensor out = M;
        for (std::size_t i = 0; i < M.rows(); ++i) {
            for (std::size_t j = 0; j < M.cols(); ++j) out.at(i, j) += b.data[j];
        }
        return push(binary(OpKind::AddBias, m, bias, std::move(out)));
    }

    int add(int a, int b) { return elementwise_pair(OpKind::Add, a, b); }
    int sub(int a, int b) { return elementwise_pair(OpKind::Sub, a, b); }

    // matrix (B x C) minus a per-row scalar (B), broadcast over columns.
    int sub_col_broadcast(int m, int v) {
        const Tensor& M = value(m);
        const Tensor& V = value(v);
        if (M.rank() != 2 || V.rank() != 1 || V.numel() != M.rows()) {
            throw std::invalid_argument("sub_col_broadcast: incompatible shapes " + shape_str(M.shape) +
                                        " and " + shape_str(V.shape));
        }
        Tensor out = M;
        for (std::size_t i = 0; i < M.rows(); ++i) {
            for (std::size_t j = 0; j < M.cols(); ++j) out.at(i, j) -= V.data[i];
        }
        return push(binary(OpKind::SubColBroadcast, m, v, std::move(out)));
    }

    int relu(int x) {
        Tensor out = value(x);
        for (T& v : out.data) v = v > T(0) ? v : T(0);
        return push(unary(OpKind::Relu, x, std::move(out)));
    }

    int scale(int x, double factor) {
        Tensor out = value(x);
        for (T& v : out.data) v = static_cast<T>(factor) * v;
        Node node = unary(OpKind::Scale, x, std::move(out));
        node.scalar0 = factor;
        return push(std::move(node));
    }

    int abs(int x) {
        Tensor out = value(x);
        for (T& v : out.data) v = v < T(0) ? -v : v;
        return push(unary(OpKind::Abs, x, std::move(out)));
    }

    // Clipped hinge: 1 for x < 0, 1 - x on [0, 1], 0 for x > 1.
    int phi(int x) {
        Tensor out = value(x);
        for (T& v : out.data) v = v < T(0) ? T(1) : (v > T(1) ? T(0) : T(1) - v);
        return push(unary(OpKind::Phi, x, std::move(out)));
    }

    int sum(int x) {
        const Tensor& in = value(x);
        T acc = 0;
        for (const T& v : in.data) acc += v;
        return push(unary(OpKind::Sum, x, Tensor::scalar(acc)));
    }

    int mean(int x) {
        const Tensor& in = value(x);
        if (in.numel() == 0) throw std::invalid_argument("mean: empty tensor");
        T acc = 0;
        for (const T& v : in.data) acc += v;
        return push(unary(OpKind::Mean, x, Tensor::scalar(acc / static_cast<T>(in.numel()))));
    }

    // out[i] = m[i, labels[i]]
    int gather(int m, const std::vector<int>& labels) {
        const Tensor& M = value(m);
        check_labels(M, labels, "gather");
        Tensor out = Tensor::zeros({M.rows()});
        for (std::size_t i = 0; i < M.rows(); ++i) out.data[i] = M.at(i, static_cast<std::size_t>(labels[i]));
        Node node = unary(OpKind::Gather, m, std::move(out));
        node.indices = labels;
        return push(std::move(node));
    }

    // Copy of m with position (i, labels[i]) replaced by `fill`; the
    // replaced entries are constants (zero adjoint).
    int mask_fill(int m, const std::vector<int>& labels, T fill) {
        const Tensor& M = value(m);
        check_labels(M, labels, "mask_fill");
        Tensor out = M;
        for (std::size_t i = 0; i < M.rows(); ++i) out.at(i, static_cast<std::size_t>(labels[i])) = fill;
        Node node = unary(OpKind::MaskFill, m, std::move(out));
        node.indices = labels;
        node.scalar0 = static_cast<double>(fill);
        return push(std::move(node));
    }

    // Row-wise max over axis 1; the argmax (lowest index among ties) is
    // cached for gradient routing.
    int max_over_axis(int m) {
        const Tensor& M = value(m);
        if (M.rank() != 2 || M.cols() == 0) {
            throw std::invalid_argument("max_over_axis: need a non-empty matrix, got " + shape_str(M.shape));
        }
        Tensor out = Tensor::zeros({M.rows()});
        std::vector<int> argmax(M.rows(), 0);
        for (std::size_t i = 0; i < M.rows(); ++i) {
            T best = M.at(i, 0);
            int arg = 0;
            for (std::size_t j = 1; j < M.cols(); ++j) {
                if (M.at(i, j) > best) {
                    best = M.at(i, j);
                    arg = static_cast<int>(j);
                }
            }
            out.data[i] = best;
            argmax[i] = arg;
        }
        Node node = unary(OpKind::MaxOverAxis, m, std::move(out));
        node.indices = std::move(argmax);
        return push(std::move(node));
    }

    // Row-wise log sum exp, shifted by the row max so large scores never
    // overflow: logsumexp([1000, 1000]) = 1000 + ln 2 exactly.
    int logsumexp(int m) {
        const Tensor& M = value(m);
        if (M.rank() != 2 || M.cols() == 0) {
            throw std::invalid_argument("logsumexp: need a non-empty matrix, got " + shape_str(M.shape));
        }
        Tensor out = Tensor::zeros({M.rows()});
        for (std::size_t i = 0; i < M.rows(); ++i) {
            T mx = M.at(i, 0);
            for (std::size_t j = 1; j < M.cols(); ++j) mx = std::max(mx, M.at(i, j));
            T acc = 0;
            for (std::size_t j = 0; j < M.cols(); ++j) acc += std::exp(M.at(i, j) - mx);
            out.data[i] = mx + std::log(acc);
        }
        return push(unary(OpKind::LogSumExp, m, std::move(out)));
    }

    // Scalar inner product with a constant weight tensor of equal shape.
    // Used for sign-weighted sums; the weights never receive gradient.
    int inner(int x, Tensor weights) {
        const Tensor& X = value(x);
        if (weights.shape != X.shape) {
            throw std::invalid_argument("inner: weight shape " + shape_str(weights.shape) +
                                        " does not match " + shape_str(X.shape));
        }
        T acc = 0;
        for (std::size_t i = 0; i < X.numel(); ++i) acc += X.data[i] * weights.data[i];
        Node node = unary(OpKind::Inner, x, Tensor::scalar(acc));
        node.weights = std::move(weights);
        return push(std::move(node));
    }

    // Reverse pass from a scalar root. Every requires_grad leaf ends up
    // with an adjoint of matching shape (zeros when the leaf does not
    // influence the root).
    void backward(int root) {
        check_id(root);
        if (value(root).numel() != 1) {
            throw std::invalid_argument("backward: root must be scalar, got shape " +
                                        shape_str(value(root).shape));
        }
        grads_.assign(nodes_.size(), Tensor{});
        grads_[static_cast<std::size_t>(root)] = Tensor::full(value(root).shape, T(1));
        for (int i = root; i >= 0; --i) {
            const Node& n = nodes_[static_cast<std::size_t>(i)];
            Tensor& g = grads_[static_cast<std::size_t>(i)];
            if (g.data.empty() || !n.needs_grad) continue;
            propagate(n, g);
        }
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            if (nodes_[i].requires_grad_leaf && grads_[i].data.empty()) {
                grads_[i] = Tensor::zeros(nodes_[i].value.shape);
            }
        }
    }

    const Tensor& value(int id) const {
        check_id(id);
        return nodes_[static_cast<std::size_t>(id)].value;
    }

    const Tensor& grad(int id) const {
        check_id(id);
        const Tensor& g = grads_.at(static_cast<std::size_t>(id));
        if (g.data.empty()) {
            throw std::logic_error("grad: no adjoint recorded for node " + std::to_string(id) +
                                   "; run backward from a root it influences");
        }
        return g;
    }

    std::size_t size() const noexcept { return nodes_.size(); }

private:
    struct Node {
        OpKind op{OpKind::Leaf};
        int a{-1};
        int b{-1};
        Tensor value;
        bool needs_grad{false};
        bool requires_grad_leaf{false};
        double scalar0{0.0};           // scale factor / mask fill value
        std::size_t offset{0};         // slice_reshape
        std::vector<int> indices;      // labels or cached argmax
        Tensor weights;                // inner
    };

    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;

    Node unary(OpKind op, int x, Tensor out) {
        check_id(x);
        Node n;
        n.op = op;
        n.a = x;
        n.value = std::move(out);
        n.needs_grad = nodes_[static_cast<std::size_t>(x)].needs_grad;
        return n;
    }

    Node binary(OpKind op, int x, int y, Tensor out) {
        check_id(x);
        check_id(y);
        Node n;
        n.op = op;
        n.a = x;
        n.b = y;
        n.value = std::move(out);
        n.needs_grad = nodes_[static_cast<std::size_t>(x)].needs_grad ||
                       nodes_[static_cast<std::size_t>(y)].needs_grad;
        return n;
    }

    int elementwise_pair(OpKind op, int a, int b) {
        const Tensor& A = value(a);
        const Tensor& B = value(b);
        if (A.shape != B.shape) {
            throw std::invalid_argument("add/sub: shape mismatch " + shape_str(A.shape) + " vs " +
                                        shape_str(B.shape));
        }
        Tensor out = A;
        if (op == OpKind::Add) {
            for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] += B.data[i];
        } else {
            for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] -= B.data[i];
        }
        return push(binary(op, a, b, std::move(out)));
    }

    int push(Node n) {
#ifndef NDEBUG
        if (!n.value.all_finite()) {
            throw NumericalError("tape: non-finite value produced by op " +
                                 std::to_string(static_cast<int>(n.op)));
        }
#endif
        nodes_.push_back(std::move(n));
        return static_cast<int>(nodes_.size()) - 1;
    }

    void check_id(int id) const {
        if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
            throw std::logic_error("tape: node id " + std::to_string(id) + " out of range");
        }
    }

    static void check_labels(const Tensor& M, const std::vector<int>& labels, const char* who) {
        if (M.rank() != 2) {
            throw std::invalid_argument(std::string(who) + ": need a matrix, got " + shape_str(M.shape));
        }
        if (labels.size() != M.rows()) {
            throw std::invalid_argument(std::string(who) + ": " + std::to_string(labels.size()) +
                                        " labels for " + std::to_string(M.rows()) + " rows");
        }
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= M.cols()) {
                throw std::invalid_argument(std::string(who) + ": label " + std::to_string(labels[i]) +
                                            " out of range [0, " + std::to_string(M.cols()) + ") at row " +
                                            std::to_string(i));
            }
        }
    }

    Tensor& grad_slot(int id) {
        Tensor& g = grads_[static_cast<std::size_t>(id)];
        if (g.data.empty()) g = Tensor::zeros(nodes_[static_cast<std::size_t>(id)].value.shape);
        return g;
    }

    bool wants_grad(int id) const { return id >= 0 && nodes_[static_cast<std::size_t>(id)].needs_grad; }

    void propagate(const Node& n, const Tensor& g) {
        switch (n.op) {
            case OpKind::Leaf:
                break;
            case OpKind::SliceReshape: {
                if (!wants_grad(n.a)) break;
                Tensor& ga = grad_slot(n.a);
                for (std::size_t k = 0; k < g.numel(); ++k) ga.data[n.offset + k] += g.data[k];
                break;
            }
            case OpKind::MatMul: {
                const Tensor& A = nodes_[static_cast<std::size_t>(n.a)].value;
                const Tensor& B = nodes_[static_cast<std::size_t>(n.b)].value;
                if (wants_grad(n.a)) {
                    Tensor& ga = grad_slot(n.a);  // dA = g . B^T
                    for (std::size_t i = 0; i < A.rows(); ++i)
                        for (std::size_t k = 0; k < A.cols(); ++k) {
                            T acc = 0;
                            for (std::size_t j = 0; j < B.cols(); ++j) acc += g.at(i, j) * B.at(k, j);
                            ga.at(i, k) += acc;
                        }
                }
                if (wants_grad(n.b)) {
                    Tensor& gb = grad_slot(n.b);  // dB = A^T . g
                    for (std::size_t k = 0; k < B.rows(); ++k)
                        for (std::size_t j = 0; j < B.cols(); ++j) {
                            T acc = 0;
                            for (std::size_t i = 0; i < A.rows(); ++i) acc += A.at(i, k) * g.at(i, j);
                            gb.at(k, j) += acc;
                        }
                }
                break;
            }
            case OpKind::AddBias: {
                if (wants_grad(n.a)) {
                    Tensor& ga = grad_slot(n.a);
                    for (std::size_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i];
                }
                if (wants_grad(n.b)) {
                    Tensor& gb = grad_slot(n.b);
                    for (std::size_t i = 0; i < g.rows(); ++i)
                        for (std::size_t j = 0; j < g.cols(); ++j) gb.data[j] += g.at(i, j);
                }
                break;
            }
            case OpKind::Add:
            case OpKind::Sub: {
                if (wants_grad(n.a)) {
                    Tensor& ga = grad_slot(n.a);
                    for (std::size_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i];
                }
                if (wants_grad(n.b)) {
                    Tensor& gb = grad_slot(n.b);
                    const T s = n.op == OpKind::Add ? T(1) : T(-1);
                    for (std::size_t i = 0; i < g.numel(); ++i) gb.data[i] += s * g.data[i];
                }
                break;
            }
            case OpKind::SubColBroadcast: {
                if (wants_grad(n.a)) {
                    Tensor& ga = grad_slot(n.a);
                    for (std::size_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i];
                }
                if (wants_grad(n.b)) {
                    Tensor& gb = grad_slot(n.b);
                    for (std::size_t i = 0; i < g.rows(); ++i) {
                        T acc = 0;
                        for (std::size_t j = 0; j < g.cols(); ++j) acc += g.at(i, j);
                        gb.data[i] -= acc;
                    }
                }
                break;
            }
            case OpKind::Relu: {
                if (!wants_grad(n.a)) break;
                const Tensor& x = nodes_[static_cast<std::size_t>(n.a)].value;
                Tensor& ga = grad_slot(n.a);
                for (std::size_t i = 0; i < g.numel(); ++i)
                    if (x.data[i] > T(0)) ga.data[i] += g.data[i];
                break;
            }
            case OpKind::Scale: {
                if (!wants_grad(n.a)) break;
                Tensor& ga = grad_slot(n.a);
                const T f = static_cast<T>(n.scalar0);
                for (std::size_t i = 0; i < g.numel(); ++i) ga.data[i] += f * g.data[i];
                break;
            }
            case OpKind::Abs: {
                if (!wants_grad(n.a)) break;
                const Tensor& x = nodes_[static_cast<std::size_t>(n.a)].value;
                Tensor& ga = grad_slot(n.a);
                for (std::size_t i = 0; i < g.numel(); ++i) {
                    if (x.data[i] > T(0)) ga.data[i] += g.data[i];
                    else if (x.data[i] < T(0)) ga.data[i] -= g.data[i];
                }
                break;
            }
            case OpKind::Phi: {
                if (!wants_grad(n.a)) break;
                const Tensor& x = nodes_[static_cast<std::size_t>(n.a)].value;
                Tensor& ga = grad_slot(n.a);
                for (std::size_t i = 0; i < g.numel(); ++i)
                    if (x.data[i] > T(0) && x.data[i] < T(1)) ga.data[i] -= g.data[i];
                break;
            }
            case OpKind::Sum: {
                if (!wants_grad(n.a)) break;
                Tensor& ga = grad_slot(n.a);
                for (T& v : ga.data) v += g.data[0];
                break;
            }
            case OpKind::Mean: {
                if (!wants_grad(n.a)) break;
                Tensor& ga = grad_slot(n.a);
                const T f = g.data[0] / static_cast<T>(ga.numel());
                for (T& v : ga.data) v += f;
                break;
            }
            case OpKind::Gather: {
                if (!wants_grad(n.a)) break;
                Tensor& ga = grad_slot(n.a);
                for (std::size_t i = 0; i < g.numel(); ++i)
                    ga.at(i, static_cast<std::size_t>(n.indices[i])) += g.data[i];
                break;
            }
            case OpKind::MaskFill: {
                if (!wants_grad(n.a)) break;
                Tensor& ga = grad_slot(n.a);
                for (std::size_t i = 0; i < g.rows(); ++i)
                    for (std::size_t j = 0; j < g.cols(); ++j)
                        if (static_cast<int>(j) != n.indices[i]) ga.at(i, j) += g.at(i, j);
                break;
            }
            case OpKind::MaxOverAxis: {
                if (!wants_grad(n.a)) break;
                Tensor& ga = grad_slot(n.a);
                for (std::size_t i = 0; i < g.numel(); ++i)
                    ga.at(i, static_cast<std::size_t>(n.indices[i])) += g.data[i];
                break;
            }
            case OpKind::LogSumExp: {
                if (!wants_grad(n.a)) break;
                const Tensor& x = nodes_[static_cast<std::size_t>(n.a)].value;
                Tensor& ga = grad_slot(n.a);
                for (std::size_t i = 0; i < x.rows(); ++i)
                    for (std::size_t j = 0; j < x.cols(); ++j)
                        ga.at(i, j) += g.data[i] * std::exp(x.at(i, j) - n.value.data[i]);
                break;
            }
            case OpKind::Inner: {
                if (!wants_grad(n.a)) break;
                Tensor& ga = grad_slot(n.a);
                for (std::size_t i = 0; i < ga.numel(); ++i) ga.data[i] += g.data[0] * n.weights.data[i];
                break;
            }
        }
    }
};

using Tape = TapeT<double>;

}  // namespace lrc
