#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "fuels/autodiff.hpp"
#include "fuels/gradcheck.hpp"
#include "fuels/losses.hpp"
#include "fuels/rng.hpp"
#include "fuels/tensor.hpp"

using fuels::Graph;
using fuels::Tensor;
using namespace fuels::losses;

namespace {

Tensor random_tensor(std::size_t r, std::size_t c, fuels::rng::Stream& rng, double lo = -2.0, double hi = 2.0) {
    Tensor t(r, c);
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

Tensor unit_rows(Tensor t) {
    for (std::size_t i = 0; i < t.rows; ++i) {
        double n = 0;
        for (std::size_t j = 0; j < t.cols; ++j) n += t.at(i, j) * t.at(i, j);
        n = std::sqrt(n);
        for (std::size_t j = 0; j < t.cols; ++j) t.at(i, j) /= n;
    }
    return t;
}

}  // namespace

TEST_CASE("similarity matrix") {
    Tensor u = Tensor::from({{1.0, 0.0}, {0.0, 1.0}});
    SECTION("identical unit rows at tau=1 have diagonal e") {
        Graph g;
        int sm = similarity_matrix(g, g.constant(u), g.constant(u), 1.0);
        CHECK(g.value(sm).at(0, 0) == Catch::Approx(std::exp(1.0)).epsilon(1e-9));
        CHECK(g.value(sm).at(1, 1) == Catch::Approx(std::exp(1.0)).epsilon(1e-9));
        // orthogonal pair: cos 0 -> exp(0) = 1
        CHECK(g.value(sm).at(0, 1) == Catch::Approx(1.0).epsilon(1e-9));
    }
    SECTION("tau = 0.02 on aligned rows stays finite at exp(50)") {
        Graph g;
        Tensor one_row = Tensor::from({{0.6, 0.8}});
        int sm = similarity_matrix(g, g.constant(one_row), g.constant(one_row), 0.02);
        CHECK(g.value(sm).at(0, 0) == Catch::Approx(std::exp(50.0)).epsilon(1e-9));
        CHECK(std::isfinite(g.value(sm).at(0, 0)));
        CHECK(g.value(sm).at(0, 0) == Catch::Approx(5.1847055285870724e21).epsilon(1e-4));
    }
    SECTION("tau must be positive") {
        Graph g;
        CHECK_THROWS_AS(similarity_matrix(g, g.constant(u), g.constant(u), 0.0), fuels::ValidationError);
    }
}

TEST_CASE("hard negative filtering") {
    auto rng = fuels::rng::make_stream(4, 31);
    Graph g;
    Tensor sm_vals(3, 3);
    for (double& v : sm_vals.data) v = rng.uniform(0.5, 3.0);  // exponentials are positive
    int sm = g.constant(sm_vals);

    SECTION("all-negative filter removes everything") {
        auto res = filter_negatives(g, sm, g.constant(Tensor(3, 3, -1.0)));
        CHECK(g.value(res.z).all_zero());
        for (const auto& tn : res.true_negatives) CHECK(tn.empty());
    }
    SECTION("single positive entry survives") {
        Tensor w(3, 3, -1.0);
        w.at(0, 1) = 1.0;
        auto res = filter_negatives(g, sm, g.constant(w));
        CHECK(res.true_negatives[0] == std::vector<std::size_t>{1});
        CHECK(res.true_negatives[1].empty());
        CHECK(res.true_negatives[2].empty());
        CHECK(g.value(res.z).at(0, 1) == sm_vals.at(0, 1));
    }
    SECTION("init-style filter keeps exactly the off-diagonal") {
        Tensor w(3, 3, 1.0);
        for (int i = 0; i < 3; ++i) w.at(i, i) = -1.0;
        auto res = filter_negatives(g, sm, g.constant(w));
        // hand-applied Hadamard + ReLU on the 3x3
        for (std::size_t b = 0; b < 3; ++b) {
            CHECK(res.true_negatives[b].size() == 2);
            for (std::size_t i = 0; i < 3; ++i) {
                double expected = i == b ? 0.0 : sm_vals.at(b, i);
                CHECK(g.value(res.z).at(b, i) == expected);
            }
        }
    }
}

TEST_CASE("intra-client loss") {
    SECTION("no surviving negatives gives exactly zero") {
        Graph g;
        Tensor sm_vals = Tensor::from({{2.0, 3.0}, {1.5, 2.5}});
        int loss = intra_loss(g, g.constant(sm_vals), g.constant(Tensor(2, 2, 0.0)));
        CHECK(g.value(loss).at(0, 0) == 0.0);
    }
    SECTION("B=1 with one unit negative") {
        Graph g;
        int loss = intra_loss(g, g.constant(Tensor::from({{std::exp(1.0)}})),
                              g.constant(Tensor::from({{1.0}})));
        // -log(e / (e + 1)) evaluated by scalar arithmetic
        CHECK(g.value(loss).at(0, 0) == Catch::Approx(0.3132616875182228).margin(1e-12));
    }
    SECTION("matches scalar arithmetic and zero entries stay inert") {
        Graph g;
        Tensor sm_vals = Tensor::from({{2.0, 3.0}, {1.5, 2.5}});
        Tensor z = Tensor::from({{0.0, 1.2}, {0.0, 0.0}});
        int loss = intra_loss(g, g.constant(sm_vals), g.constant(z));
        // only the (0,1) negative survives; row 1 contributes -log(1) = 0
        double expect = 0.5 * (-std::log(2.0 / (2.0 + 1.2)));
        CHECK(g.value(loss).at(0, 0) == Catch::Approx(expect).margin(1e-12));
    }
}

TEST_CASE("loss depends on the filter only through Z") {
    auto rng = fuels::rng::make_stream(8, 33);
    Tensor r = random_tensor(4, 6, rng);
    Tensor r_aug = random_tensor(4, 6, rng);
    Tensor w(4, 4, -0.5);
    w.at(1, 2) = 0.8;
    auto eval = [&](const Tensor& filt) {
        Graph g;
        auto task = intra_task(g, g.constant(r), g.constant(r_aug), g.constant(filt), 0.5);
        return g.value(task.loss).at(0, 0);
    };
    double base = eval(w);
    Tensor w2 = w;
    w2.at(0, 0) = -2.5;  // stays negative -> Z unchanged
    w2.at(3, 1) = -0.01;
    CHECK(eval(w2) == base);
    Tensor w3 = w;
    w3.at(1, 2) = 1.6;  // surviving value changes -> Z changes
    CHECK(eval(w3) != base);
}

TEST_CASE("inter-client loss") {
    auto rng = fuels::rng::make_stream(9, 34);
    SECTION("PR == NR gives ln 2 for any representation") {
        for (int trial = 0; trial < 10; ++trial) {
            Tensor r = random_tensor(4, 6, rng);
            Tensor p = random_tensor(4, 6, rng);
            Graph g;
            int loss = inter_loss(g, g.constant(r), p, p, 0.5);
            CHECK(std::fabs(g.value(loss).at(0, 0) - std::log(2.0)) <= 1e-9);
        }
    }
    SECTION("aligned positives and orthogonal negatives at tau=1") {
        Tensor r = unit_rows(Tensor::from({{1.0, 0.0, 0.0, 0.0}, {0.0, 1.0, 0.0, 0.0}}));
        Tensor nr = Tensor::from({{0.0, 0.0, 1.0, 0.0}, {0.0, 0.0, 0.0, 1.0}});
        Graph g;
        int loss = inter_loss(g, g.constant(r), r, nr, 1.0);
        // -log(e / (e + 1)) by scalar arithmetic
        CHECK(g.value(loss).at(0, 0) == Catch::Approx(0.3132616875182228).margin(1e-9));
    }
    SECTION("zero-sentinel prototypes skip the task with no gradient") {
        Tensor r = random_tensor(3, 4, rng);
        Graph g;
        int rleaf = g.leaf(r, true);
        int loss = inter_loss(g, rleaf, Tensor(3, 4, 0.0), Tensor(3, 4, 0.0), 0.02);
        CHECK(g.value(loss).at(0, 0) == 0.0);
        g.backward(loss);
        CHECK(!g.has_grad(rleaf));
    }
    SECTION("tau must be positive") {
        Graph g;
        Tensor r = random_tensor(2, 2, rng);
        CHECK_THROWS_AS(inter_loss(g, g.constant(r), r, r, -1.0), fuels::ValidationError);
    }
}

TEST_CASE("prediction loss") {
    Graph g;
    SECTION("perfect prediction") {
        Tensor y = Tensor::from({{1.0}, {2.0}});
        CHECK(g.value(pred_loss(g, g.constant(y), g.constant(y))).at(0, 0) == 0.0);
    }
    SECTION("B=2 example") {
        int loss = pred_loss(g, g.constant(Tensor::from({{1.0}, {2.0}})),
                             g.constant(Tensor::from({{0.0}, {2.0}})));
        CHECK(g.value(loss).at(0, 0) == Catch::Approx(0.5).margin(1e-15));
    }
    SECTION("degree-2 homogeneity in the residual") {
        Tensor y = Tensor::from({{1.0}, {-0.5}, {2.0}});
        Tensor yhat1 = Tensor::from({{0.4}, {0.1}, {1.0}});
        Tensor yhat2 = y;
        for (std::size_t i = 0; i < 3; ++i) yhat2.at(i, 0) = y.at(i, 0) - 2 * (y.at(i, 0) - yhat1.at(i, 0));
        double l1 = g.value(pred_loss(g, g.constant(y), g.constant(yhat1))).at(0, 0);
        double l2 = g.value(pred_loss(g, g.constant(y), g.constant(yhat2))).at(0, 0);
        CHECK(l2 == Catch::Approx(4.0 * l1).epsilon(1e-12));
    }
    SECTION("length mismatch") {
        CHECK_THROWS_AS(pred_loss(g, g.constant(Tensor(2, 1)), g.constant(Tensor(3, 1))), fuels::DimensionError);
    }
}

TEST_CASE("total loss combination") {
    Graph g;
    int pred = g.scalar_constant(0.25);
    int intra = g.scalar_constant(0.75);
    int inter = g.scalar_constant(0.1);
    SECTION("rho = 0 drops the inter term") {
        CHECK(g.value(total_loss(g, pred, intra, inter, 0.0)).at(0, 0) == 1.0);
    }
    SECTION("rho = 5 adds 0.5 for inter = 0.1") {
        CHECK(g.value(total_loss(g, pred, intra, inter, 5.0)).at(0, 0) == Catch::Approx(1.5).margin(1e-12));
    }
    SECTION("all zero components") {
        int z = g.scalar_constant(0.0);
        CHECK(g.value(total_loss(g, z, z, z, 5.0)).at(0, 0) == 0.0);
    }
    SECTION("negative rho rejected") {
        CHECK_THROWS_AS(total_loss(g, pred, intra, inter, -0.1), fuels::ValidationError);
    }
}

TEST_CASE("contrastive losses are non-negative") {
    auto rng = fuels::rng::make_stream(10, 35);
    for (int trial = 0; trial < 20; ++trial) {
        Graph g;
        Tensor r = random_tensor(4, 6, rng);
        Tensor r_aug = random_tensor(4, 6, rng);
        Tensor w = random_tensor(4, 4, rng);
        auto task = intra_task(g, g.constant(r), g.constant(r_aug), g.constant(w), 0.3);
        CHECK(g.value(task.loss).at(0, 0) >= 0.0);
        Tensor pr = random_tensor(4, 6, rng);
        Tensor nr = random_tensor(4, 6, rng);
        int inter = inter_loss(g, g.constant(r), pr, nr, 0.3);
        CHECK(g.value(inter).at(0, 0) >= 0.0);
    }
}

TEST_CASE("full objective gradient matches finite differences (smoke)") {
    auto res = fuels::gradcheck::check_instance(fuels::rng::substream(7, 0));
    INFO("worst " << res.worst_param);
    CHECK(res.ok());
}
