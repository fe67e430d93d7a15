#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <vector>

#include "fuels/adam.hpp"
#include "fuels/autodiff.hpp"
#include "fuels/rng.hpp"
#include "fuels/tensor.hpp"

using fuels::AdamConfig;
using fuels::AdamState;
using fuels::Graph;
using fuels::Tensor;

namespace {

Tensor random_tensor(std::size_t r, std::size_t c, fuels::rng::Stream& rng, double lo = -2.0, double hi = 2.0) {
    Tensor t(r, c);
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

// Finite-difference oracle: builds mean_all(op(leaves...)) twice per
// coordinate and compares the central difference against the reverse-mode
// gradient of every input.
double fd_max_rel_error(std::vector<Tensor> inputs,
                        const std::function<int(Graph&, const std::vector<int>&)>& build, double step = 1e-5) {
    auto eval = [&](const std::vector<Tensor>& ins) {
        Graph g;
        std::vector<int> ids;
        for (const Tensor& t : ins) ids.push_back(g.leaf(t, false));
        return g.value(g.mean_all(build(g, ids))).at(0, 0);
    };
    Graph g;
    std::vector<int> ids;
    for (const Tensor& t : inputs) ids.push_back(g.leaf(t, true));
    g.backward(g.mean_all(build(g, ids)));
    double worst = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const Tensor grad = g.has_grad(ids[i]) ? g.grad(ids[i]) : Tensor(inputs[i].rows, inputs[i].cols);
        for (std::size_t k = 0; k < inputs[i].size(); ++k) {
            std::vector<Tensor> probe = inputs;
            probe[i].data[k] += step;
            double hi = eval(probe);
            probe[i].data[k] -= 2 * step;
            double lo = eval(probe);
            double fd = (hi - lo) / (2 * step);
            double a = grad.data[k];
            worst = std::max(worst, std::fabs(a - fd) / std::max({1.0, std::fabs(a), std::fabs(fd)}));
        }
    }
    return worst;
}

}  // namespace

TEST_CASE("forward op examples") {
    Graph g;
    int s = g.sigmoid(g.constant(Tensor::from({{0.0}})));
    CHECK(g.value(s).at(0, 0) == 0.5);

    Tensor u = Tensor::from({{1.0, 0.0}, {0.0, 1.0}});
    int cos = g.row_cosine(g.constant(u), g.constant(u));
    CHECK(g.value(cos).at(0, 0) == Catch::Approx(1.0).margin(1e-9));
    CHECK(g.value(cos).at(1, 1) == Catch::Approx(1.0).margin(1e-9));
    CHECK(g.value(cos).at(0, 1) == Catch::Approx(0.0).margin(1e-12));

    int mm = g.matmul(g.constant(Tensor::from({{1, 2}, {3, 4}})), g.constant(Tensor::identity(2)));
    CHECK(g.value(mm) == Tensor::from({{1, 2}, {3, 4}}));
}

TEST_CASE("forward is deterministic") {
    auto run = [] {
        auto rng = fuels::rng::make_stream(99, 1);
        Graph g;
        Tensor a = random_tensor(3, 4, rng), b = random_tensor(4, 2, rng);
        return g.value(g.tanh(g.matmul(g.leaf(a), g.leaf(b)))).data;
    };
    CHECK(run() == run());
}

TEST_CASE("backward examples") {
    SECTION("x^2 at x=3") {
        Graph g;
        int x = g.leaf(Tensor::from({{3.0}}), true);
        g.backward(g.mul(x, x));
        CHECK(g.grad(x).at(0, 0) == Catch::Approx(6.0).margin(1e-12));
    }
    SECTION("mean of sigmoid(0-vector)") {
        Graph g;
        int x = g.leaf(Tensor(1, 4, 0.0), true);
        g.backward(g.mean_all(g.sigmoid(x)));
        for (double v : g.grad(x).data) CHECK(v == Catch::Approx(0.25 / 4.0).margin(1e-15));
    }
    SECTION("non-scalar root is a contract error") {
        Graph g;
        int x = g.leaf(Tensor(2, 2, 1.0), true);
        CHECK_THROWS_AS(g.backward(x), fuels::ContractError);
    }
}

TEST_CASE("domain and shape errors") {
    Graph g;
    CHECK_THROWS_AS(g.log(g.constant(Tensor::from({{-1.0}}))), fuels::DomainError);
    CHECK_THROWS_AS(g.matmul(g.constant(Tensor(2, 3)), g.constant(Tensor(2, 3))), fuels::DimensionError);
    CHECK_THROWS_AS(g.add(g.constant(Tensor(2, 3)), g.constant(Tensor(3, 2))), fuels::DimensionError);
}

TEST_CASE("every op kind matches central finite differences") {
    // 20 seeded random instances per op, entries in [-2, 2] (shifted to safe
    // ranges for log and away from the relu kink).
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto rng = fuels::rng::make_stream(seed, 2);
        Tensor a = random_tensor(3, 4, rng);
        Tensor b = random_tensor(3, 4, rng);
        Tensor m = random_tensor(4, 2, rng);
        Tensor pos = random_tensor(3, 4, rng, 0.1, 10.0);
        Tensor nudged = a;
        for (double& v : nudged.data)
            if (std::fabs(v) < 0.01) v = 0.01;

        auto unary = [&](const char* name, const Tensor& in, auto op) {
            INFO(name << " seed " << seed);
            CHECK(fd_max_rel_error({in}, [&](Graph& g, const std::vector<int>& ids) {
                      return op(g, ids[0]);
                  }) <= 1e-5);
        };
        unary("sigmoid", a, [](Graph& g, int x) { return g.sigmoid(x); });
        unary("tanh", a, [](Graph& g, int x) { return g.tanh(x); });
        unary("relu", nudged, [](Graph& g, int x) { return g.relu(x); });
        unary("exp", a, [](Graph& g, int x) { return g.exp(x); });
        unary("log", pos, [](Graph& g, int x) { return g.log(x); });
        unary("sum", a, [](Graph& g, int x) { return g.sum(x); });
        unary("mean-all", a, [](Graph& g, int x) { return g.mean_all(x); });
        unary("scalar-mul", a, [](Graph& g, int x) { return g.scalar_mul(x, -1.7); });
        unary("transpose", a, [](Graph& g, int x) { return g.transpose(x); });
        unary("slice-rows", a, [](Graph& g, int x) { return g.slice_rows(x, 1, 3); });

        auto binary = [&](const char* name, const Tensor& x, const Tensor& y, auto op) {
            INFO(name << " seed " << seed);
            CHECK(fd_max_rel_error({x, y}, [&](Graph& g, const std::vector<int>& ids) {
                      return op(g, ids[0], ids[1]);
                  }) <= 1e-5);
        };
        binary("add", a, b, [](Graph& g, int x, int y) { return g.add(x, y); });
        binary("sub", a, b, [](Graph& g, int x, int y) { return g.sub(x, y); });
        binary("mul", a, b, [](Graph& g, int x, int y) { return g.mul(x, y); });
        binary("matmul", a, m, [](Graph& g, int x, int y) { return g.matmul(x, y); });
        binary("concat-cols", a, b, [](Graph& g, int x, int y) { return g.concat_cols(x, y); });
        binary("row-cosine", a, b, [](Graph& g, int x, int y) { return g.row_cosine(x, y); });
    }
}

TEST_CASE("gradient accumulates over repeated use") {
    Graph g;
    int x = g.leaf(Tensor::from({{2.0}}), true);
    int y = g.add(g.mul(x, x), x);  // x^2 + x
    g.backward(y);
    CHECK(g.grad(x).at(0, 0) == Catch::Approx(5.0).margin(1e-12));
}

TEST_CASE("exp/log compose to identity") {
    auto rng = fuels::rng::make_stream(5, 3);
    Graph g;
    Tensor x = random_tensor(4, 4, rng, 0.1, 10.0);
    int back = g.log(g.exp(g.constant(x)));
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(std::fabs(g.value(back).data[i] - x.data[i]) <= 1e-12);
}

TEST_CASE("concat then slicing at the seam recovers both operands") {
    auto rng = fuels::rng::make_stream(6, 3);
    Graph g;
    Tensor a = random_tensor(3, 2, rng), b = random_tensor(3, 5, rng);
    int cat = g.concat_cols(g.constant(a), g.constant(b));
    int catt = g.transpose(cat);
    int left = g.transpose(g.slice_rows(catt, 0, 2));
    int right = g.transpose(g.slice_rows(catt, 2, 7));
    CHECK(g.value(left) == a);
    CHECK(g.value(right) == b);
}

TEST_CASE("adam zero gradient leaves parameter unchanged") {
    Tensor p(2, 2, 1.5);
    Tensor zero(2, 2, 0.0);
    AdamState st;
    adam_step(p, zero, st, AdamConfig{});
    CHECK(st.step == 1);
    CHECK(p == Tensor(2, 2, 1.5));
}

TEST_CASE("adam first step with unit gradient") {
    Tensor p(1, 1, 0.7);
    AdamState st;
    adam_step(p, Tensor(1, 1, 1.0), st, AdamConfig{});
    // bias-corrected mhat = vhat = 1 => step of lr / (1 + eps)
    CHECK(std::fabs((0.7 - p.at(0, 0)) - 0.001) <= 1e-9);
}

TEST_CASE("adam matches a scripted oracle over consecutive steps") {
    // Independent scalar transcription of the published recurrence.
    double lr = 0.001, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    double x = 0.3, m = 0.0, v = 0.0;
    Tensor p(1, 1, 0.3);
    AdamState st;
    for (int t = 1; t <= 5; ++t) {
        double grad = 2.5;
        m = b1 * m + (1 - b1) * grad;
        v = b2 * v + (1 - b2) * grad * grad;
        double mhat = m / (1 - std::pow(b1, t));
        double vhat = v / (1 - std::pow(b2, t));
        x -= lr * mhat / (std::sqrt(vhat) + eps);
        adam_step(p, Tensor(1, 1, 2.5), st, AdamConfig{});
        CHECK(std::fabs(p.at(0, 0) - x) <= 1e-12);
    }
}

TEST_CASE("adam rejects non-finite gradients") {
    Tensor p(1, 1, 0.0);
    AdamState st;
    Tensor bad(1, 1, std::nan(""));
    CHECK_THROWS_AS(adam_step(p, bad, st, AdamConfig{}), fuels::DomainError);
}
