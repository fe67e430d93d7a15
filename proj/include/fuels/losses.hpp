#pragma once

#include <vector>

#include "fuels/autodiff.hpp"
#include "fuels/error.hpp"
#include "fuels/tensor.hpp"

// Loss construction. Every function appends nodes to the caller's graph and
// returns node ids, so the full objective stays differentiable end to end.
// Scalar values are read back via Graph::value(id).

namespace fuels::losses {

namespace detail {

// Extracts the diagonal of a square node as a column: (M . I) * ones.
inline int diag_col(Graph& g, int square) {
    std::size_t n = g.value(square).rows;
    if (g.value(square).cols != n) throw DimensionError("diag_col: matrix not square");
    int masked = g.mul(square, g.constant(Tensor::identity(n)));
    return g.matmul(masked, g.constant(Tensor::ones(n, 1)));
}

inline int row_sums(Graph& g, int m) {
    return g.matmul(m, g.constant(Tensor::ones(g.value(m).cols, 1)));
}

}  // namespace detail

// SM[b][i] = exp(cos(r_b, r'_i) / tau).
inline int similarity_matrix(Graph& g, int repr, int repr_aug, double tau) {
    if (tau <= 0.0) throw ValidationError("similarity_matrix: tau must be positive");
    return g.exp(g.scalar_mul(g.row_cosine(repr, repr_aug), 1.0 / tau));
}

struct FilterResult {
    int z;                                             // ReLU(SM . W), node id
    std::vector<std::vector<std::size_t>> true_negatives;  // per row: {i : Z[b][i] > 0}
};

// Z = ReLU(SM . W). Surviving indices are the true negatives; no index is
// excluded by fiat -- the filtering is entirely learned through W.
inline FilterResult filter_negatives(Graph& g, int sm, int filter) {
    FilterResult out;
    out.z = g.relu(g.mul(sm, filter));
    const Tensor& z = g.value(out.z);
    out.true_negatives.resize(z.rows);
    for (std::size_t b = 0; b < z.rows; ++b)
        for (std::size_t i = 0; i < z.cols; ++i)
            if (z.at(b, i) > 0.0) out.true_negatives[b].push_back(i);
    return out;
}

// (1/B) sum_b -log(SM[b][b] / (SM[b][b] + sum_{i in TN_b} Z[b][i])).
// The negative sum equals the row sum of Z since filtered entries are zero.
inline int intra_loss(Graph& g, int sm, int z) {
    int diag = detail::diag_col(g, sm);
    int denom = g.add(diag, detail::row_sums(g, z));
    return g.mean_all(g.sub(g.log(denom), g.log(diag)));
}

struct IntraArtifacts {
    int sm = -1;
    int z = -1;
    std::vector<std::vector<std::size_t>> true_negatives;
    int loss = -1;
};

inline IntraArtifacts intra_task(Graph& g, int repr, int repr_aug, int filter, double tau) {
    IntraArtifacts a;
    a.sm = similarity_matrix(g, repr, repr_aug, tau);
    auto f = filter_negatives(g, a.sm, filter);
    a.z = f.z;
    a.true_negatives = std::move(f.true_negatives);
    a.loss = intra_loss(g, a.sm, a.z);
    return a;
}

// (1/B) sum_b -log(pos_b / (pos_b + neg_b)) with
//   pos_b = exp(cos(r_b, PR_b) / tau), neg_b = exp(cos(r_b, NR_b) / tau).
// An all-zero PR is the round-1 sentinel: the task is skipped (constant 0,
// no gradient). An all-zero NR omits the negative term, which collapses the
// ratio to 1 and likewise contributes nothing.
inline int inter_loss(Graph& g, int repr, const Tensor& pos_proto, const Tensor& neg_proto, double tau) {
    if (tau <= 0.0) throw ValidationError("inter_loss: tau must be positive");
    if (pos_proto.all_zero()) return g.scalar_constant(0.0);
    const Tensor& r = g.value(repr);
    if (pos_proto.rows != r.rows || pos_proto.cols != r.cols)
        throw DimensionError("inter_loss: positive prototype shape differs from representation");
    if (neg_proto.all_zero()) return g.scalar_constant(0.0);
    if (neg_proto.rows != r.rows || neg_proto.cols != r.cols)
        throw DimensionError("inter_loss: negative prototype shape differs from representation");
    int pos = g.exp(g.scalar_mul(detail::diag_col(g, g.row_cosine(repr, g.constant(pos_proto))), 1.0 / tau));
    int neg = g.exp(g.scalar_mul(detail::diag_col(g, g.row_cosine(repr, g.constant(neg_proto))), 1.0 / tau));
    return g.mean_all(g.sub(g.log(g.add(pos, neg)), g.log(pos)));
}

// (1/B) ||y - yhat||^2 over the batch.
inline int pred_loss(Graph& g, int targets, int preds) {
    int diff = g.sub(targets, preds);
    return g.mean_all(g.mul(diff, diff));
}

// total = pred + intra + rho * inter.
inline int total_loss(Graph& g, int pred, int intra, int inter, double rho) {
    if (rho < 0.0) throw ValidationError("total_loss: rho must be >= 0");
    return g.add(g.add(pred, intra), g.scalar_mul(inter, rho));
}

struct LossBreakdown {
    double pred = 0.0;
    double intra = 0.0;
    double inter = 0.0;
    double total = 0.0;
    double rho = 0.0;
};

inline LossBreakdown read_breakdown(const Graph& g, int pred, int intra, int inter, int total, double rho) {
    return {g.value(pred).at(0, 0), g.value(intra).at(0, 0), g.value(inter).at(0, 0), g.value(total).at(0, 0), rho};
}

}  // namespace fuels::losses
