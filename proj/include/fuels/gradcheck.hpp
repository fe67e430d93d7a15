#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "fuels/autodiff.hpp"
#include "fuels/data.hpp"
#include "fuels/losses.hpp"
#include "fuels/model.hpp"
#include "fuels/rng.hpp"
#include "fuels/tensor.hpp"

// Finite-difference verification of the full combined objective (prediction
// + intra-client + weighted inter-client loss) against reverse-mode
// gradients, over every parameter coordinate including the filtering matrix.

namespace fuels::gradcheck {

struct Instance {
    model::ClientModel mdl;
    data::Batch raw;
    data::Batch aug;
    Tensor pos_proto;
    Tensor neg_proto;
    double tau = 0.02;
    double rho = 5.0;
};

// Random small instance: B = 4, h = 3, c = q = 3, entries in [-2, 2].
// Filter entries keep |w| >= 0.05 so the finite-difference window never
// straddles the ReLU kink at SM . W = 0.
inline Instance make_instance(std::uint64_t seed) {
    Instance in;
    constexpr std::size_t B = 4, h = 3, c = 3, q = 3;
    in.mdl = model::init_model(h, B, seed);
    auto rng = rng::make_stream(seed, 0x6C, 1);
    auto fill = [&](Tensor& t, double lo, double hi) {
        for (double& v : t.data) v = rng.uniform(lo, hi);
    };
    fill(in.mdl.filter, -2.0, 2.0);
    for (double& v : in.mdl.filter.data)
        if (std::fabs(v) < 0.05) v = v < 0 ? -0.05 : 0.05;
    in.raw = {Tensor(B, c), Tensor(B, q), Tensor(B, 1)};
    in.aug = {Tensor(B, c), Tensor(B, q), Tensor(B, 1)};
    for (Tensor* t : {&in.raw.cv, &in.raw.pv, &in.raw.targets, &in.aug.cv, &in.aug.pv, &in.aug.targets})
        fill(*t, -2.0, 2.0);
    in.pos_proto = Tensor(B, 2 * h);
    in.neg_proto = Tensor(B, 2 * h);
    fill(in.pos_proto, -2.0, 2.0);
    fill(in.neg_proto, -2.0, 2.0);
    return in;
}

struct EvalResult {
    double loss = 0.0;
    std::vector<Tensor> grads;  // aligned with model::named_params order
};

inline EvalResult eval_total_loss(Instance& in, bool want_grads) {
    Graph g;
    auto leaves = model::bind_model(g, in.mdl, want_grads, true);
    int repr = model::encode(g, leaves, in.raw);
    int repr_aug = model::encode(g, leaves, in.aug);
    auto task = losses::intra_task(g, repr, repr_aug, leaves.filter, in.tau);
    int inter = losses::inter_loss(g, repr, in.pos_proto, in.neg_proto, in.tau);
    int preds = model::decode(g, leaves, repr);
    int pred = losses::pred_loss(g, g.constant(in.raw.targets), preds);
    int total = losses::total_loss(g, pred, task.loss, inter, in.rho);
    EvalResult out;
    out.loss = g.value(total).at(0, 0);
    if (want_grads) {
        g.backward(total);
        std::vector<int> ids = {leaves.closeness.wz,   leaves.closeness.wr,   leaves.closeness.wh,
                                leaves.closeness.uz,   leaves.closeness.ur,   leaves.closeness.uh,
                                leaves.closeness.bz,   leaves.closeness.br,   leaves.closeness.bh,
                                leaves.periodicity.wz, leaves.periodicity.wr, leaves.periodicity.wh,
                                leaves.periodicity.uz, leaves.periodicity.ur, leaves.periodicity.uh,
                                leaves.periodicity.bz, leaves.periodicity.br, leaves.periodicity.bh,
                                leaves.dec_weight,     leaves.dec_bias,       leaves.filter};
        for (int id : ids) {
            const Tensor& v = g.value(id);
            out.grads.push_back(g.has_grad(id) ? g.grad(id) : Tensor(v.rows, v.cols));
        }
    }
    return out;
}

struct CheckResult {
    double max_rel_error = 0.0;
    std::string worst_param;
    bool ok(double tol = 1e-5) const { return max_rel_error <= tol; }
};

// Central differences with step 1e-5 on every coordinate of every parameter;
// relative error |a - b| / max(1, |a|, |b|).
inline CheckResult check_instance(std::uint64_t seed, double step = 1e-5) {
    Instance in = make_instance(seed);
    EvalResult ad = eval_total_loss(in, true);
    auto params = model::named_params(in.mdl);
    CheckResult res;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor& t = *params[pi].second;
        for (std::size_t k = 0; k < t.size(); ++k) {
            double keep = t.data[k];
            t.data[k] = keep + step;
            double hi = eval_total_loss(in, false).loss;
            t.data[k] = keep - step;
            double lo = eval_total_loss(in, false).loss;
            t.data[k] = keep;
            double fd = (hi - lo) / (2.0 * step);
            double a = ad.grads[pi].data[k];
            double rel = std::fabs(a - fd) / std::max({1.0, std::fabs(a), std::fabs(fd)});
            if (rel > res.max_rel_error) {
                res.max_rel_error = rel;
                res.worst_param = params[pi].first + "[" + std::to_string(k) + "]";
            }
        }
    }
    return res;
}

struct SuiteResult {
    double max_rel_error = 0.0;
    std::string worst;
    std::size_t instances = 0;
    bool ok(double tol = 1e-5) const { return max_rel_error <= tol; }
};

inline SuiteResult run_suite(std::uint64_t base_seed, std::size_t instances = 20) {
    SuiteResult out;
    out.instances = instances;
    for (std::size_t i = 0; i < instances; ++i) {
        CheckResult r = check_instance(rng::substream(base_seed, i));
        if (r.max_rel_error > out.max_rel_error) {
            out.max_rel_error = r.max_rel_error;
            out.worst = "seed#" + std::to_string(i) + " " + r.worst_param;
        }
    }
    return out;
}

}  // namespace fuels::gradcheck
