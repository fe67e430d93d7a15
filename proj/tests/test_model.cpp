#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "fuels/autodiff.hpp"
#include "fuels/data.hpp"
#include "fuels/losses.hpp"
#include "fuels/model.hpp"
#include "fuels/rng.hpp"
#include "fuels/serialize.hpp"

using fuels::Graph;
using fuels::Tensor;
using namespace fuels::model;

namespace {

ClientModel zero_model(std::size_t h, std::size_t B) {
    ClientModel m = init_model(h, B, 1);
    for (auto& [name, t] : named_params(m))
        if (name != "filter")
            for (double& v : t->data) v = 0.0;
    return m;
}

fuels::data::Batch random_batch(std::size_t B, std::size_t c, std::size_t q, std::uint64_t seed) {
    auto rng = fuels::rng::make_stream(seed, 21);
    fuels::data::Batch b{Tensor(B, c), Tensor(B, q), Tensor(B, 1)};
    for (Tensor* t : {&b.cv, &b.pv, &b.targets})
        for (double& v : t->data) v = rng.uniform(-2, 2);
    return b;
}

}  // namespace

TEST_CASE("all-zero parameters give all-zero hidden states") {
    ClientModel m = zero_model(3, 4);
    Graph g;
    auto leaves = bind_model(g, m, false);
    auto batch = random_batch(4, 5, 3, 2);
    int r = encode(g, leaves, batch);
    CHECK(g.value(r).rows == 4);
    CHECK(g.value(r).cols == 6);
    CHECK(g.value(r).all_zero());
}

TEST_CASE("scalar GRU matches a hand-evaluated recurrence") {
    // h = 1 with fixed scalar weights; the oracle below is an independent
    // transcription of z/r/candidate/update equations.
    ClientModel m = zero_model(1, 1);
    double wz = 0.3, uz = -0.4, bz = 0.1;
    double wr = 0.7, ur = 0.2, br = -0.2;
    double wh = -0.5, uh = 0.6, bh = 0.05;
    m.encoder.closeness.wz.at(0, 0) = wz;
    m.encoder.closeness.uz.at(0, 0) = uz;
    m.encoder.closeness.bz.at(0, 0) = bz;
    m.encoder.closeness.wr.at(0, 0) = wr;
    m.encoder.closeness.ur.at(0, 0) = ur;
    m.encoder.closeness.br.at(0, 0) = br;
    m.encoder.closeness.wh.at(0, 0) = wh;
    m.encoder.closeness.uh.at(0, 0) = uh;
    m.encoder.closeness.bh.at(0, 0) = bh;

    double x1 = 0.9, x2 = -1.3;
    auto sigma = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    double h = 0.0;
    for (double x : {x1, x2}) {
        double z = sigma(wz * x + uz * h + bz);
        double r = sigma(wr * x + ur * h + br);
        double cand = std::tanh(wh * x + uh * (r * h) + bh);
        h = (1 - z) * h + z * cand;
    }

    Graph g;
    auto leaves = bind_model(g, m, false);
    int seq = g.constant(Tensor::from({{x1, x2}}));
    int out = gru_forward(g, leaves.closeness, seq);
    CHECK(std::fabs(g.value(out).at(0, 0) - h) <= 1e-12);
}

TEST_CASE("gru output shape is B x h") {
    ClientModel m = init_model(5, 7, 3);
    Graph g;
    auto leaves = bind_model(g, m, false);
    int out = gru_forward(g, leaves.closeness, g.constant(Tensor(7, 9, 0.25)));
    CHECK(g.value(out).rows == 7);
    CHECK(g.value(out).cols == 5);
}

TEST_CASE("encode concatenates closeness first and halves are independent") {
    ClientModel m = init_model(2, 3, 11);
    auto batch = random_batch(3, 3, 3, 5);
    Graph g;
    auto leaves = bind_model(g, m, false);
    int r = encode(g, leaves, batch);
    REQUIRE(g.value(r).cols == 4);
    int hc = gru_forward(g, leaves.closeness, g.constant(batch.cv));
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 2; ++j) CHECK(g.value(r).at(i, j) == g.value(hc).at(i, j));

    // Perturbing pv must leave the first h columns bit-identical.
    auto perturbed = batch;
    perturbed.pv.at(1, 1) += 0.5;
    Graph g2;
    auto leaves2 = bind_model(g2, m, false);
    int r2 = encode(g2, leaves2, perturbed);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 2; ++j) CHECK(g.value(r).at(i, j) == g2.value(r2).at(i, j));
    bool second_half_changed = false;
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 2; j < 4; ++j) second_half_changed |= g.value(r).at(i, j) != g2.value(r2).at(i, j);
    CHECK(second_half_changed);
}

TEST_CASE("identical parameters and batches produce identical representations") {
    ClientModel a = init_model(3, 4, 7);
    ClientModel b = init_model(3, 4, 7);
    auto batch = random_batch(4, 3, 3, 9);
    Graph ga, gb;
    auto la = bind_model(ga, a, false);
    auto lb = bind_model(gb, b, false);
    CHECK(ga.value(encode(ga, la, batch)) == gb.value(encode(gb, lb, batch)));
}

TEST_CASE("decode examples") {
    SECTION("zero weight maps to constant bias") {
        ClientModel m = zero_model(2, 3);
        m.decoder.bias.at(0, 0) = 1.25;
        Graph g;
        auto leaves = bind_model(g, m, false);
        int r = g.constant(Tensor(3, 4, 0.7));
        const Tensor& yhat = g.value(decode(g, leaves, r));
        for (std::size_t i = 0; i < 3; ++i) CHECK(yhat.at(i, 0) == 1.25);
    }
    SECTION("one-hot rows pick out weight coordinates") {
        ClientModel m = zero_model(2, 4);
        for (std::size_t i = 0; i < 4; ++i) m.decoder.weight.at(i, 0) = static_cast<double>(i + 1);
        m.decoder.bias.at(0, 0) = 0.5;
        Graph g;
        auto leaves = bind_model(g, m, false);
        const Tensor& yhat = g.value(decode(g, leaves, g.constant(Tensor::identity(4))));
        for (std::size_t i = 0; i < 4; ++i) CHECK(yhat.at(i, 0) == Catch::Approx(i + 1.5).margin(1e-12));
    }
    SECTION("random case matches a dot-product oracle") {
        ClientModel m = init_model(3, 5, 13);
        auto rng = fuels::rng::make_stream(13, 22);
        Tensor r(5, 6);
        for (double& v : r.data) v = rng.uniform(-2, 2);
        Graph g;
        auto leaves = bind_model(g, m, false);
        const Tensor& yhat = g.value(decode(g, leaves, g.constant(r)));
        for (std::size_t i = 0; i < 5; ++i) {
            double dot = m.decoder.bias.at(0, 0);
            for (std::size_t j = 0; j < 6; ++j) dot += r.at(i, j) * m.decoder.weight.at(j, 0);
            CHECK(std::fabs(yhat.at(i, 0) - dot) <= 1e-12);
        }
    }
}

TEST_CASE("init_model determinism and filter pattern") {
    ClientModel a = init_model(4, 5, 77);
    ClientModel b = init_model(4, 5, 77);
    ClientModel c = init_model(4, 5, 78);
    auto pa = named_params(a), pb = named_params(b), pc = named_params(c);
    bool all_equal = true, any_diff = false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        all_equal &= *pa[i].second == *pb[i].second;
        any_diff |= !(*pa[i].second == *pc[i].second);
    }
    CHECK(all_equal);
    CHECK(any_diff);

    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 5; ++j) CHECK(a.filter.at(i, j) == (i == j ? -1.0 : 1.0));

    // Uniform(-1/sqrt(h)) bound on weights.
    double bound = 1.0 / std::sqrt(4.0);
    for (double v : a.encoder.closeness.uz.data) CHECK(std::fabs(v) <= bound);
}

TEST_CASE("initial filter zeroes the filtered diagonal of Z") {
    ClientModel m = init_model(3, 4, 5);
    auto batch = random_batch(4, 3, 3, 6);
    auto aug = random_batch(4, 3, 3, 7);
    Graph g;
    auto leaves = bind_model(g, m, true);
    int r = encode(g, leaves, batch);
    int r2 = encode(g, leaves, aug);
    auto task = fuels::losses::intra_task(g, r, r2, leaves.filter, 0.5);
    for (std::size_t b = 0; b < 4; ++b) {
        CHECK(g.value(task.z).at(b, b) == 0.0);
        for (std::size_t i = 0; i < 4; ++i)
            if (i != b) CHECK(g.value(task.z).at(b, i) > 0.0);
    }
}

TEST_CASE("checkpoint serialization round-trips bit-exactly") {
    ClientModel m = init_model(3, 4, 123);
    auto j = fuels::io::model_to_json(m);
    ClientModel back = init_model(3, 4, 0);
    fuels::io::model_from_json(j, back);
    auto pm = named_params(m), pb = named_params(back);
    for (std::size_t i = 0; i < pm.size(); ++i) CHECK(*pm[i].second == *pb[i].second);
}
