#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "fuels/autodiff.hpp"
#include "fuels/data.hpp"
#include "fuels/error.hpp"
#include "fuels/rng.hpp"
#include "fuels/tensor.hpp"

// The prediction model: a closeness-GRU and a periodicity-GRU whose final
// hidden states are concatenated into the representation (d_r = 2h), a
// linear decoder, and the learnable B x B hard-negative filtering matrix.

namespace fuels::model {

// One GRU over scalar inputs: per gate an input weight (1 x h), a recurrent
// weight (h x h) and a bias (1 x h).
struct GruParams {
    std::size_t hidden = 0;
    Tensor wz, wr, wh;
    Tensor uz, ur, uh;
    Tensor bz, br, bh;
};

struct EncoderParams {
    GruParams closeness;
    GruParams periodicity;
    std::size_t repr_dim() const { return closeness.hidden + periodicity.hidden; }
};

struct DecoderParams {
    Tensor weight;  // d_r x 1
    Tensor bias;    // 1 x 1
};

struct ClientModel {
    EncoderParams encoder;
    DecoderParams decoder;
    Tensor filter;  // W_n, B x B
    std::size_t hidden = 0;
    std::size_t batch = 0;
};

// Stable iteration order over all parameter tensors; shared by the
// optimizer, aggregation and serialization.
inline std::vector<std::pair<std::string, Tensor*>> named_params(ClientModel& m) {
    std::vector<std::pair<std::string, Tensor*>> out;
    auto gru = [&out](const std::string& prefix, GruParams& g) {
        out.emplace_back(prefix + ".wz", &g.wz);
        out.emplace_back(prefix + ".wr", &g.wr);
        out.emplace_back(prefix + ".wh", &g.wh);
        out.emplace_back(prefix + ".uz", &g.uz);
        out.emplace_back(prefix + ".ur", &g.ur);
        out.emplace_back(prefix + ".uh", &g.uh);
        out.emplace_back(prefix + ".bz", &g.bz);
        out.emplace_back(prefix + ".br", &g.br);
        out.emplace_back(prefix + ".bh", &g.bh);
    };
    gru("enc.close", m.encoder.closeness);
    gru("enc.period", m.encoder.periodicity);
    out.emplace_back("dec.weight", &m.decoder.weight);
    out.emplace_back("dec.bias", &m.decoder.bias);
    out.emplace_back("filter", &m.filter);
    return out;
}

inline std::size_t encoder_param_count(const ClientModel& m) {
    auto one = [](const GruParams& g) {
        return g.wz.size() + g.wr.size() + g.wh.size() + g.uz.size() + g.ur.size() + g.uh.size() + g.bz.size() +
               g.br.size() + g.bh.size();
    };
    return one(m.encoder.closeness) + one(m.encoder.periodicity);
}

inline std::size_t predictor_param_count(const ClientModel& m) {
    return encoder_param_count(m) + m.decoder.weight.size() + m.decoder.bias.size();
}

// Weights ~ Uniform(-1/sqrt(h), 1/sqrt(h)); biases zero. The filtering
// matrix starts at +1 off the diagonal (all non-self pairs true negatives)
// and -1 on it (positives pre-filtered).
inline ClientModel init_model(std::size_t hidden, std::size_t batch, std::uint64_t seed) {
    if (hidden < 1 || batch < 1) throw ValidationError("init_model: hidden and batch must be >= 1");
    auto rng = rng::make_stream(seed, rng::kModelInit);
    double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    auto uniform_tensor = [&](std::size_t r, std::size_t c) {
        Tensor t(r, c);
        for (double& v : t.data) v = rng.uniform(-bound, bound);
        return t;
    };
    auto make_gru = [&]() {
        GruParams g;
        g.hidden = hidden;
        g.wz = uniform_tensor(1, hidden);
        g.wr = uniform_tensor(1, hidden);
        g.wh = uniform_tensor(1, hidden);
        g.uz = uniform_tensor(hidden, hidden);
        g.ur = uniform_tensor(hidden, hidden);
        g.uh = uniform_tensor(hidden, hidden);
        g.bz = Tensor(1, hidden);
        g.br = Tensor(1, hidden);
        g.bh = Tensor(1, hidden);
        return g;
    };
    ClientModel m;
    m.hidden = hidden;
    m.batch = batch;
    m.encoder.closeness = make_gru();
    m.encoder.periodicity = make_gru();
    m.decoder.weight = uniform_tensor(2 * hidden, 1);
    m.decoder.bias = Tensor(1, 1);
    m.filter = Tensor(batch, batch, 1.0);
    for (std::size_t i = 0; i < batch; ++i) m.filter.at(i, i) = -1.0;
    return m;
}

// Graph-side handles for one model's parameters. Leaves are created per
// graph (define-by-run); gradients are read back by the same ids.
struct GruLeaves {
    int wz, wr, wh, uz, ur, uh, bz, br, bh;
};

struct ModelLeaves {
    GruLeaves closeness;
    GruLeaves periodicity;
    int dec_weight = -1;
    int dec_bias = -1;
    int filter = -1;
};

inline GruLeaves bind_gru(Graph& g, const GruParams& p, bool train) {
    return {g.leaf(p.wz, train), g.leaf(p.wr, train), g.leaf(p.wh, train),
            g.leaf(p.uz, train), g.leaf(p.ur, train), g.leaf(p.uh, train),
            g.leaf(p.bz, train), g.leaf(p.br, train), g.leaf(p.bh, train)};
}

// Binds every parameter as a graph leaf. train_encoder/train_filter control
// which leaves request gradients (ablations freeze the filter).
inline ModelLeaves bind_model(Graph& g, const ClientModel& m, bool train, bool train_filter = true) {
    ModelLeaves l;
    l.closeness = bind_gru(g, m.encoder.closeness, train);
    l.periodicity = bind_gru(g, m.encoder.periodicity, train);
    l.dec_weight = g.leaf(m.decoder.weight, train);
    l.dec_bias = g.leaf(m.decoder.bias, train);
    l.filter = g.leaf(m.filter, train && train_filter);
    return l;
}

// Standard GRU recurrence from h0 = 0 over a B x len batch of scalar steps:
//   z = sigmoid(x Wz + h Uz + bz), r = sigmoid(x Wr + h Ur + br),
//   hcand = tanh(x Wh + (r . h) Uh + bh), h' = (1 - z) . h + z . hcand.
// Returns the final hidden state (B x h).
inline int gru_forward(Graph& g, const GruLeaves& p, int sequence) {
    // Note: g.value references go stale after the next node push; only sizes
    // are kept across graph construction.
    std::size_t B = g.value(sequence).rows;
    std::size_t len = g.value(sequence).cols;
    std::size_t h = g.value(p.uz).rows;
    if (len < 1) throw DimensionError("gru_forward: empty sequence");
    int ones_col = g.constant(Tensor::ones(B, 1));         // broadcasts 1 x h biases to B x h
    int ones_bh = g.constant(Tensor::ones(B, h));
    int hidden = g.constant(Tensor(B, h));
    int seq_t = g.transpose(sequence);
    for (std::size_t t = 0; t < len; ++t) {
        int x = g.transpose(g.slice_rows(seq_t, t, t + 1));  // B x 1 step input
        int z = g.sigmoid(g.add(g.add(g.matmul(x, p.wz), g.matmul(hidden, p.uz)), g.matmul(ones_col, p.bz)));
        int r = g.sigmoid(g.add(g.add(g.matmul(x, p.wr), g.matmul(hidden, p.ur)), g.matmul(ones_col, p.br)));
        int cand = g.tanh(
            g.add(g.add(g.matmul(x, p.wh), g.matmul(g.mul(r, hidden), p.uh)), g.matmul(ones_col, p.bh)));
        hidden = g.add(g.mul(g.sub(ones_bh, z), hidden), g.mul(z, cand));
    }
    return hidden;
}

// r_n = concat[GRU_c(cv); GRU_p(pv)], closeness half first. cv/pv enter the
// graph as constants; gradients flow only to the parameter leaves.
inline int encode(Graph& g, const ModelLeaves& l, const data::Batch& batch) {
    int cv = g.constant(batch.cv);
    int pv = g.constant(batch.pv);
    int hc = gru_forward(g, l.closeness, cv);
    int hp = gru_forward(g, l.periodicity, pv);
    return g.concat_cols(hc, hp);
}

// yhat = r . weight + bias (B x 1).
inline int decode(Graph& g, const ModelLeaves& l, int representation) {
    std::size_t rows = g.value(representation).rows;
    if (g.value(representation).cols != g.value(l.dec_weight).rows)
        throw DimensionError("decode: representation width differs from decoder weight");
    int ones_col = g.constant(Tensor::ones(rows, 1));
    return g.add(g.matmul(representation, l.dec_weight), g.matmul(ones_col, l.dec_bias));
}

}  // namespace fuels::model
