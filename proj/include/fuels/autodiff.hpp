#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "fuels/error.hpp"
#include "fuels/tensor.hpp"

// Reverse-mode automatic differentiation over a define-by-run tape.
// Every operation computes its output eagerly and records enough to replay
// the chain rule backwards. Graphs are rebuilt per batch; a Graph is
// single-threaded, distinct graphs may run fully in parallel.

namespace fuels {

enum class OpKind {
    kLeaf,
    kMatmul,
    kAdd,
    kSub,
    kMul,  // elementwise (Hadamard)
    kConcatCols,
    kSigmoid,
    kTanh,
    kRelu,
    kExp,
    kLog,
    kMeanAll,
    kSum,
    kScalarMul,
    kRowCosine,  // pairwise row cosine similarity
    kTranspose,
    kSliceRows,
};

// Norm regularizer for cosine similarity; keeps all-zero rows defined.
constexpr double kCosineEps = 1e-12;

class Graph {
public:
    struct Node {
        OpKind kind;
        int a = -1;
        int b = -1;
        double scalar = 0.0;    // kScalarMul factor
        std::size_t i0 = 0, i1 = 0;  // kSliceRows range [i0, i1)
        Tensor value;
        bool needs_grad = false;
    };

    int leaf(Tensor value, bool requires_grad = false) {
        check_finite(value, "leaf");
        Node n;
        n.kind = OpKind::kLeaf;
        n.value = std::move(value);
        n.needs_grad = requires_grad;
        return push(std::move(n));
    }

    int constant(Tensor value) { return leaf(std::move(value), false); }
    int scalar_constant(double v) { return leaf(Tensor(1, 1, v), false); }

    int matmul(int a, int b) {
        const Tensor &A = value(a), &B = value(b);
        if (A.cols != B.rows) throw DimensionError("matmul: inner dimensions differ");
        Tensor out(A.rows, B.cols);
        // ikj order; the j loop is contiguous in both B and out.
        for (std::size_t i = 0; i < A.rows; ++i)
            for (std::size_t k = 0; k < A.cols; ++k) {
                double aik = A.at(i, k);
                if (aik == 0.0) continue;
                const double* brow = &B.data[k * B.cols];
                double* orow = &out.data[i * out.cols];
                for (std::size_t j = 0; j < B.cols; ++j) orow[j] += aik * brow[j];
            }
        return push_op(OpKind::kMatmul, a, b, std::move(out));
    }

    int add(int a, int b) { return ewise(OpKind::kAdd, a, b); }
    int sub(int a, int b) { return ewise(OpKind::kSub, a, b); }
    int mul(int a, int b) { return ewise(OpKind::kMul, a, b); }

    int concat_cols(int a, int b) {
        const Tensor &A = value(a), &B = value(b);
        if (A.rows != B.rows) throw DimensionError("concat-cols: row counts differ");
        Tensor out(A.rows, A.cols + B.cols);
        for (std::size_t i = 0; i < A.rows; ++i) {
            for (std::size_t j = 0; j < A.cols; ++j) out.at(i, j) = A.at(i, j);
            for (std::size_t j = 0; j < B.cols; ++j) out.at(i, A.cols + j) = B.at(i, j);
        }
        return push_op(OpKind::kConcatCols, a, b, std::move(out));
    }

    int sigmoid(int a) {
        Tensor out = value(a);
        for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
        return push_op(OpKind::kSigmoid, a, -1, std::move(out));
    }

    int tanh(int a) {
        Tensor out = value(a);
        for (double& v : out.data) v = std::tanh(v);
        return push_op(OpKind::kTanh, a, -1, std::move(out));
    }

    int relu(int a) {
        Tensor out = value(a);
        for (double& v : out.data) v = v > 0.0 ? v : 0.0;
        return push_op(OpKind::kRelu, a, -1, std::move(out));
    }

    int exp(int a) {
        Tensor out = value(a);
        for (double& v : out.data) v = std::exp(v);
        return push_op(OpKind::kExp, a, -1, std::move(out));
    }

    int log(int a) {
        Tensor out = value(a);
        for (double& v : out.data) {
            if (v <= 0.0) throw DomainError("log: non-positive entry");
            v = std::log(v);
        }
        return push_op(OpKind::kLog, a, -1, std::move(out));
    }

    int mean_all(int a) {
        const Tensor& A = value(a);
        if (A.size() == 0) throw DimensionError("mean-all of empty tensor");
        double s = 0.0;
        for (double v : A.data) s += v;
        return push_op(OpKind::kMeanAll, a, -1, Tensor(1, 1, s / static_cast<double>(A.size())));
    }

    int sum(int a) {
        const Tensor& A = value(a);
        double s = 0.0;
        for (double v : A.data) s += v;
        return push_op(OpKind::kSum, a, -1, Tensor(1, 1, s));
    }

    int scalar_mul(int a, double c) {
        Tensor out = value(a);
        for (double& v : out.data) v *= c;
        Node n;
        n.kind = OpKind::kScalarMul;
        n.a = a;
        n.scalar = c;
        n.value = std::move(out);
        n.needs_grad = nodes_[a].needs_grad;
        check_finite(n.value, "scalar-mul");
        return push(std::move(n));
    }

    // C[i][j] = cos(U row i, V row j), norms regularized by kCosineEps.
    int row_cosine(int a, int b) {
        const Tensor &U = value(a), &V = value(b);
        if (U.cols != V.cols) throw DimensionError("row-cosine-similarity: column counts differ");
        std::vector<double> nu = row_norms(U), nv = row_norms(V);
        Tensor out(U.rows, V.rows);
        for (std::size_t i = 0; i < U.rows; ++i)
            for (std::size_t j = 0; j < V.rows; ++j) {
                double dot = 0.0;
                for (std::size_t k = 0; k < U.cols; ++k) dot += U.at(i, k) * V.at(j, k);
                out.at(i, j) = dot / ((nu[i] + kCosineEps) * (nv[j] + kCosineEps));
            }
        return push_op(OpKind::kRowCosine, a, b, std::move(out));
    }

    int transpose(int a) {
        const Tensor& A = value(a);
        Tensor out(A.cols, A.rows);
        for (std::size_t i = 0; i < A.rows; ++i)
            for (std::size_t j = 0; j < A.cols; ++j) out.at(j, i) = A.at(i, j);
        return push_op(OpKind::kTranspose, a, -1, std::move(out));
    }

    int slice_rows(int a, std::size_t i0, std::size_t i1) {
        const Tensor& A = value(a);
        if (i0 >= i1 || i1 > A.rows) throw DimensionError("slice-rows: bad range");
        Tensor out(i1 - i0, A.cols);
        for (std::size_t i = i0; i < i1; ++i)
            for (std::size_t j = 0; j < A.cols; ++j) out.at(i - i0, j) = A.at(i, j);
        Node n;
        n.kind = OpKind::kSliceRows;
        n.a = a;
        n.i0 = i0;
        n.i1 = i1;
        n.value = std::move(out);
        n.needs_grad = nodes_[a].needs_grad;
        return push(std::move(n));
    }

    const Tensor& value(int id) const { return nodes_.at(static_cast<std::size_t>(id)).value; }
    std::size_t node_count() const { return nodes_.size(); }

    // Propagates d(root)/d(node) to every node that needs a gradient.
    // Root must be a 1x1 scalar; gradients accumulate over multiple uses.
    void backward(int root) {
        const Tensor& r = value(root);
        if (r.rows != 1 || r.cols != 1) throw ContractError("backward: root is not a scalar");
        grads_.assign(nodes_.size(), Tensor());
        grads_[static_cast<std::size_t>(root)] = Tensor(1, 1, 1.0);
        for (int id = root; id >= 0; --id) {
            const Node& n = nodes_[static_cast<std::size_t>(id)];
            Tensor& g = grads_[static_cast<std::size_t>(id)];
            if (g.empty() || !n.needs_grad) continue;
            propagate(n, g);
        }
    }

    bool has_grad(int id) const {
        return static_cast<std::size_t>(id) < grads_.size() && !grads_[static_cast<std::size_t>(id)].empty();
    }

    const Tensor& grad(int id) const {
        if (!has_grad(id)) throw ContractError("grad: node has no gradient (run backward first)");
        return grads_[static_cast<std::size_t>(id)];
    }

private:
    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;

    static void check_finite(const Tensor& t, const char* what) {
        if (!t.finite()) throw DomainError(std::string(what) + ": non-finite result");
    }

    int push(Node n) {
        nodes_.push_back(std::move(n));
        return static_cast<int>(nodes_.size()) - 1;
    }

    int push_op(OpKind kind, int a, int b, Tensor out) {
        check_finite(out, "op");
        Node n;
        n.kind = kind;
        n.a = a;
        n.b = b;
        n.value = std::move(out);
        n.needs_grad = nodes_[a].needs_grad || (b >= 0 && nodes_[b].needs_grad);
        return push(std::move(n));
    }

    int ewise(OpKind kind, int a, int b) {
        const Tensor &A = value(a), &B = value(b);
        if (!A.same_shape(B)) throw DimensionError("elementwise op: shapes differ");
        Tensor out(A.rows, A.cols);
        for (std::size_t i = 0; i < A.size(); ++i) {
            double x = A.data[i], y = B.data[i];
            out.data[i] = kind == OpKind::kAdd ? x + y : kind == OpKind::kSub ? x - y : x * y;
        }
        return push_op(kind, a, b, std::move(out));
    }

    static std::vector<double> row_norms(const Tensor& T) {
        std::vector<double> n(T.rows, 0.0);
        for (std::size_t i = 0; i < T.rows; ++i) {
            double s = 0.0;
            for (std::size_t k = 0; k < T.cols; ++k) s += T.at(i, k) * T.at(i, k);
            n[i] = std::sqrt(s);
        }
        return n;
    }

    Tensor& grad_buf(int id) {
        Tensor& g = grads_[static_cast<std::size_t>(id)];
        if (g.empty()) {
            const Tensor& v = nodes_[static_cast<std::size_t>(id)].value;
            g = Tensor(v.rows, v.cols);
        }
        return g;
    }

    void accumulate(int id, const Tensor& delta) {
        if (id < 0 || !nodes_[static_cast<std::size_t>(id)].needs_grad) return;
        Tensor& g = grad_buf(id);
        for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += delta.data[i];
    }

    void propagate(const Node& n, const Tensor& g) {
        switch (n.kind) {
            case OpKind::kLeaf:
                return;
            case OpKind::kMatmul: {
                const Tensor &A = value(n.a), &B = value(n.b);
                if (nodes_[static_cast<std::size_t>(n.a)].needs_grad) {
                    Tensor da(A.rows, A.cols);  // dA = g . B^T
                    for (std::size_t i = 0; i < A.rows; ++i)
                        for (std::size_t j = 0; j < B.cols; ++j) {
                            double gij = g.at(i, j);
                            if (gij == 0.0) continue;
                            for (std::size_t k = 0; k < A.cols; ++k) da.at(i, k) += gij * B.at(k, j);
                        }
                    accumulate(n.a, da);
                }
                if (nodes_[static_cast<std::size_t>(n.b)].needs_grad) {
                    Tensor db(B.rows, B.cols);  // dB = A^T . g
                    for (std::size_t i = 0; i < A.rows; ++i)
                        for (std::size_t k = 0; k < A.cols; ++k) {
                            double aik = A.at(i, k);
                            if (aik == 0.0) continue;
                            for (std::size_t j = 0; j < B.cols; ++j) db.at(k, j) += aik * g.at(i, j);
                        }
                    accumulate(n.b, db);
                }
                return;
            }
            case OpKind::kAdd:
                accumulate(n.a, g);
                accumulate(n.b, g);
                return;
            case OpKind::kSub: {
                accumulate(n.a, g);
                if (n.b >= 0 && nodes_[static_cast<std::size_t>(n.b)].needs_grad) {
                    Tensor neg = g;
                    for (double& v : neg.data) v = -v;
                    accumulate(n.b, neg);
                }
                return;
            }
            case OpKind::kMul: {
                const Tensor &A = value(n.a), &B = value(n.b);
                if (nodes_[static_cast<std::size_t>(n.a)].needs_grad) {
                    Tensor da(A.rows, A.cols);
                    for (std::size_t i = 0; i < da.size(); ++i) da.data[i] = g.data[i] * B.data[i];
                    accumulate(n.a, da);
                }
                if (nodes_[static_cast<std::size_t>(n.b)].needs_grad) {
                    Tensor db(B.rows, B.cols);
                    for (std::size_t i = 0; i < db.size(); ++i) db.data[i] = g.data[i] * A.data[i];
                    accumulate(n.b, db);
                }
                return;
            }
            case OpKind::kConcatCols: {
                const Tensor &A = value(n.a), &B = value(n.b);
                if (nodes_[static_cast<std::size_t>(n.a)].needs_grad) {
                    Tensor da(A.rows, A.cols);
                    for (std::size_t i = 0; i < A.rows; ++i)
                        for (std::size_t j = 0; j < A.cols; ++j) da.at(i, j) = g.at(i, j);
                    accumulate(n.a, da);
                }
                if (nodes_[static_cast<std::size_t>(n.b)].needs_grad) {
                    Tensor db(B.rows, B.cols);
                    for (std::size_t i = 0; i < B.rows; ++i)
                        for (std::size_t j = 0; j < B.cols; ++j) db.at(i, j) = g.at(i, A.cols + j);
                    accumulate(n.b, db);
                }
                return;
            }
            case OpKind::kSigmoid: {
                Tensor da(n.value.rows, n.value.cols);
                for (std::size_t i = 0; i < da.size(); ++i) {
                    double s = n.value.data[i];
                    da.data[i] = g.data[i] * s * (1.0 - s);
                }
                accumulate(n.a, da);
                return;
            }
            case OpKind::kTanh: {
                Tensor da(n.value.rows, n.value.cols);
                for (std::size_t i = 0; i < da.size(); ++i) {
                    double t = n.value.data[i];
                    da.data[i] = g.data[i] * (1.0 - t * t);
                }
                accumulate(n.a, da);
                return;
            }
            case OpKind::kRelu: {
                const Tensor& A = value(n.a);
                Tensor da(A.rows, A.cols);
                for (std::size_t i = 0; i < da.size(); ++i) da.data[i] = A.data[i] > 0.0 ? g.data[i] : 0.0;
                accumulate(n.a, da);
                return;
            }
            case OpKind::kExp: {
                Tensor da(n.value.rows, n.value.cols);
                for (std::size_t i = 0; i < da.size(); ++i) da.data[i] = g.data[i] * n.value.data[i];
                accumulate(n.a, da);
                return;
            }
            case OpKind::kLog: {
                const Tensor& A = value(n.a);
                Tensor da(A.rows, A.cols);
                for (std::size_t i = 0; i < da.size(); ++i) da.data[i] = g.data[i] / A.data[i];
                accumulate(n.a, da);
                return;
            }
            case OpKind::kMeanAll: {
                const Tensor& A = value(n.a);
                Tensor da(A.rows, A.cols, g.at(0, 0) / static_cast<double>(A.size()));
                accumulate(n.a, da);
                return;
            }
            case OpKind::kSum: {
                const Tensor& A = value(n.a);
                Tensor da(A.rows, A.cols, g.at(0, 0));
                accumulate(n.a, da);
                return;
            }
            case OpKind::kScalarMul: {
                Tensor da = g;
                for (double& v : da.data) v *= n.scalar;
                accumulate(n.a, da);
                return;
            }
            case OpKind::kRowCosine: {
                const Tensor &U = value(n.a), &V = value(n.b);
                std::vector<double> nu = row_norms(U), nv = row_norms(V);
                bool want_u = nodes_[static_cast<std::size_t>(n.a)].needs_grad;
                bool want_v = nodes_[static_cast<std::size_t>(n.b)].needs_grad;
                Tensor du(U.rows, U.cols), dv(V.rows, V.cols);
                for (std::size_t i = 0; i < U.rows; ++i) {
                    double ru = nu[i] + kCosineEps;
                    double inv_u = nu[i] > 0.0 ? 1.0 / nu[i] : 0.0;
                    for (std::size_t j = 0; j < V.rows; ++j) {
                        double gij = g.at(i, j);
                        if (gij == 0.0) continue;
                        double rv = nv[j] + kCosineEps;
                        double inv_v = nv[j] > 0.0 ? 1.0 / nv[j] : 0.0;
                        double c = n.value.at(i, j);
                        double s = 1.0 / (ru * rv);
                        if (want_u)
                            for (std::size_t k = 0; k < U.cols; ++k)
                                du.at(i, k) += gij * (V.at(j, k) * s - c * U.at(i, k) * inv_u / ru);
                        if (want_v)
                            for (std::size_t k = 0; k < V.cols; ++k)
                                dv.at(j, k) += gij * (U.at(i, k) * s - c * V.at(j, k) * inv_v / rv);
                    }
                }
                if (want_u) accumulate(n.a, du);
                if (want_v) accumulate(n.b, dv);
                return;
            }
            case OpKind::kTranspose: {
                const Tensor& A = value(n.a);
                Tensor da(A.rows, A.cols);
                for (std::size_t i = 0; i < A.rows; ++i)
                    for (std::size_t j = 0; j < A.cols; ++j) da.at(i, j) = g.at(j, i);
                accumulate(n.a, da);
                return;
            }
            case OpKind::kSliceRows: {
                const Tensor& A = value(n.a);
                Tensor da(A.rows, A.cols);
                for (std::size_t i = n.i0; i < n.i1; ++i)
                    for (std::size_t j = 0; j < A.cols; ++j) da.at(i, j) = g.at(i - n.i0, j);
                accumulate(n.a, da);
                return;
            }
        }
    }
};

}  // namespace fuels
