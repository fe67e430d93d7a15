#pragma once

#include <cmath>

#include "fuels/error.hpp"
#include "fuels/tensor.hpp"

namespace fuels {

struct AdamConfig {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Per-parameter moments; allocated lazily on first step.
struct AdamState {
    Tensor m;
    Tensor v;
    long step = 0;
};

// Standard Adam update with bias correction.
inline void adam_step(Tensor& param, const Tensor& grad, AdamState& state, const AdamConfig& cfg) {
    if (!param.same_shape(grad)) throw DimensionError("adam_step: grad shape differs from param");
    if (!grad.finite()) throw DomainError("adam_step: non-finite gradient");
    if (cfg.lr <= 0.0) throw ValidationError("adam_step: lr must be positive");
    if (state.m.empty()) state.m = Tensor(param.rows, param.cols);
    if (state.v.empty()) state.v = Tensor(param.rows, param.cols);
    if (!state.m.same_shape(param) || !state.v.same_shape(param))
        throw DimensionError("adam_step: state shape differs from param");

    state.step += 1;
    double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < param.size(); ++i) {
        double g = grad.data[i];
        state.m.data[i] = cfg.beta1 * state.m.data[i] + (1.0 - cfg.beta1) * g;
        state.v.data[i] = cfg.beta2 * state.v.data[i] + (1.0 - cfg.beta2) * g * g;
        double mhat = state.m.data[i] / c1;
        double vhat = state.v.data[i] / c2;
        param.data[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

}  // namespace fuels
