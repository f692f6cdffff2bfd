#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "des/rng.hpp"
#include "des/tensor.hpp"
#include "testutil.hpp"

using namespace des;

namespace {

void fill(Tape& t, TensorId id, const std::vector<double>& v) {
    std::memcpy(t.data(id), v.data(), v.size() * sizeof(double));
}

}  // namespace

TEST_CASE("softmax forward matches the closed form") {
    Tape t;
    TensorId z = t.leaf(1, 3);
    fill(t, z, {1.0, 2.0, 3.0});
    TensorId p = t.softmax(z);
    CHECK(t.data(p)[0] == doctest::Approx(0.09003057317038046).epsilon(1e-12));
    CHECK(t.data(p)[1] == doctest::Approx(0.24472847105479764).epsilon(1e-12));
    CHECK(t.data(p)[2] == doctest::Approx(0.6652409557748219).epsilon(1e-12));

    // invariance under a constant logit shift (max subtraction)
    Tape t2;
    TensorId z2 = t2.leaf(1, 3);
    fill(t2, z2, {1001.0, 1002.0, 1003.0});
    TensorId p2 = t2.softmax(z2);
    for (int j = 0; j < 3; ++j)
        CHECK(t2.data(p2)[j] == doctest::Approx(t.data(p)[j]).epsilon(1e-12));
}

TEST_CASE("cross_entropy forward is the mean negative log-likelihood") {
    Tape t;
    TensorId p = t.leaf(2, 2);
    fill(t, p, {0.3, 0.7, 0.5, 0.5});
    TensorId l = t.cross_entropy(p, {0, 1});
    const double want = 0.5 * (1.2039728043259361 + 0.6931471805599453);  // -ln.3, -ln.5
    CHECK(t.value(l) == doctest::Approx(want).epsilon(1e-14));
}

TEST_CASE("elementwise and structural ops forward") {
    Tape t;
    TensorId a = t.leaf(2, 2);
    TensorId b = t.leaf(2, 2);
    fill(t, a, {1, 2, 3, 4});
    fill(t, b, {10, 20, 30, 40});
    CHECK(t.data(t.add(a, b))[3] == 44.0);
    CHECK(t.data(t.sub(b, a))[0] == 9.0);
    CHECK(t.data(t.mul(a, b))[1] == 40.0);
    CHECK(t.data(t.scale(a, -2.0))[2] == -6.0);
    CHECK(t.value(t.sum(a)) == 10.0);
    CHECK(t.data(t.relu(t.scale(a, -1.0)))[0] == 0.0);

    TensorId mmb = t.leaf(2, 3);
    fill(t, mmb, {1, 0, 2, 0, 1, 3});
    TensorId mm = t.matmul(a, mmb);  // [2x2][2x3]
    CHECK(t.rows(mm) == 2);
    CHECK(t.cols(mm) == 3);
    CHECK(t.data(mm)[0] == 1.0);   // 1*1+2*0
    CHECK(t.data(mm)[2] == 8.0);   // 1*2+2*3
    CHECK(t.data(mm)[5] == 18.0);  // 3*2+4*3

    TensorId bias = t.leaf(1, 2);
    fill(t, bias, {100, 200});
    TensorId ar = t.add_rowvec(a, bias);
    CHECK(t.data(ar)[0] == 101.0);
    CHECK(t.data(ar)[3] == 204.0);
}

TEST_CASE("backward matches finite differences per op") {
    const std::vector<double> xa = {0.7, -1.2, 0.4, 1.9, -0.3, 0.8};
    const std::vector<double> xb = {0.2, 0.5, -0.9, 1.1, 0.6, -1.7};

    auto check_grad = [&](const std::function<TensorId(Tape&, TensorId, TensorId)>& build,
                          const std::vector<double>& a0, const std::vector<double>& b0,
                          std::size_t rows_a, std::size_t cols_a, std::size_t rows_b,
                          std::size_t cols_b) {
        Tape t;
        TensorId a = t.leaf(rows_a, cols_a, true);
        TensorId b = t.leaf(rows_b, cols_b, true);
        fill(t, a, a0);
        fill(t, b, b0);
        t.backward(build(t, a, b));

        auto loss_at = [&](const std::vector<double>& av, const std::vector<double>& bv) {
            Tape t2;
            TensorId a2 = t2.leaf(rows_a, cols_a, true);
            TensorId b2 = t2.leaf(rows_b, cols_b, true);
            fill(t2, a2, av);
            fill(t2, b2, bv);
            return t2.value(build(t2, a2, b2));
        };
        const auto fd_a = testutil::fd_gradient(
            [&](const std::vector<double>& v) { return loss_at(v, b0); }, a0);
        const auto fd_b = testutil::fd_gradient(
            [&](const std::vector<double>& v) { return loss_at(a0, v); }, b0);
        const double* ga = t.grad(a);
        const double* gb = t.grad(b);
        CHECK(testutil::grad_mismatches({ga, ga + a0.size()}, fd_a) == 0);
        CHECK(testutil::grad_mismatches({gb, gb + b0.size()}, fd_b) == 0);
    };

    SUBCASE("add") {
        check_grad([](Tape& t, TensorId a, TensorId b) { return t.sum(t.mul(t.add(a, b), b)); },
                   xa, xb, 2, 3, 2, 3);
    }
    SUBCASE("sub") {
        check_grad([](Tape& t, TensorId a, TensorId b) { return t.sum(t.mul(t.sub(a, b), a)); },
                   xa, xb, 2, 3, 2, 3);
    }
    SUBCASE("mul+scale") {
        check_grad(
            [](Tape& t, TensorId a, TensorId b) { return t.sum(t.scale(t.mul(a, b), 1.3)); },
            xa, xb, 2, 3, 2, 3);
    }
    SUBCASE("relu") {
        check_grad(
            [](Tape& t, TensorId a, TensorId b) { return t.sum(t.mul(t.relu(a), b)); },
            xa, xb, 2, 3, 2, 3);  // entries are all away from 0
    }
    SUBCASE("matmul") {
        check_grad([](Tape& t, TensorId a, TensorId b) { return t.sum(t.matmul(a, b)); },
                   xa, xb, 2, 3, 3, 2);
    }
    SUBCASE("matmul weighted") {
        check_grad(
            [](Tape& t, TensorId a, TensorId b) {
                TensorId y = t.matmul(a, b);  // 2x2
                TensorId w = t.leaf(2, 2);
                fill(t, w, {0.3, -1.1, 0.7, 2.2});
                return t.sum(t.mul(y, w));
            },
            xa, xb, 2, 3, 3, 2);
    }
    SUBCASE("add_rowvec") {
        check_grad(
            [](Tape& t, TensorId a, TensorId b) {
                TensorId w = t.leaf(2, 3);
                fill(t, w, {0.5, -0.25, 1.5, 2.0, -1.0, 0.75});
                return t.sum(t.mul(t.add_rowvec(a, b), w));
            },
            xa, {0.4, -0.6, 1.2}, 2, 3, 1, 3);
    }
    SUBCASE("softmax") {
        check_grad(
            [](Tape& t, TensorId a, TensorId b) { return t.sum(t.mul(t.softmax(a), b)); },
            xa, xb, 2, 3, 2, 3);
    }
    SUBCASE("softmax + cross_entropy") {
        check_grad(
            [](Tape& t, TensorId a, TensorId b) {
                TensorId mixed = t.mul(a, b);  // keep both inputs in the graph
                return t.cross_entropy(t.softmax(mixed), {2, 0});
            },
            xa, xb, 2, 3, 2, 3);
    }
    SUBCASE("cross_entropy on raw probabilities") {
        check_grad(
            [](Tape& t, TensorId a, TensorId b) {
                (void)b;
                return t.cross_entropy(a, {0, 1});
            },
            {0.3, 0.7, 0.2, 0.8}, {0.0}, 2, 2, 1, 1);
    }
}

TEST_CASE("softmax->cross_entropy logit gradient is (p - onehot)/n") {
    Tape t;
    TensorId z = t.leaf(2, 3, true);
    fill(t, z, {0.4, -1.0, 2.2, 0.1, 0.2, -0.5});
    TensorId p = t.softmax(z);
    const std::vector<int> labels = {2, 0};
    t.backward(t.cross_entropy(p, labels));
    const double* g = t.grad(z);
    const double* pv = t.data(p);
    for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t j = 0; j < 3; ++j) {
            const double want =
                (pv[r * 3 + j] - (static_cast<std::size_t>(labels[r]) == j ? 1.0 : 0.0)) / 2.0;
            CHECK(g[r * 3 + j] == doctest::Approx(want).epsilon(1e-13));
        }
}

TEST_CASE("backward is deterministic") {
    auto run = [] {
        Tape t;
        TensorId a = t.leaf(3, 4, true);
        Rng rng(42);
        for (std::size_t i = 0; i < 12; ++i) t.data(a)[i] = rng.uniform(-2, 2);
        TensorId w = t.leaf(4, 2);
        for (std::size_t i = 0; i < 8; ++i) t.data(w)[i] = rng.uniform(-1, 1);
        t.backward(t.cross_entropy(t.softmax(t.matmul(t.relu(a), w)), {0, 1, 0}));
        const double* g = t.grad(a);
        return std::vector<double>(g, g + 12);
    };
    const auto g1 = run(), g2 = run();
    CHECK(std::memcmp(g1.data(), g2.data(), g1.size() * sizeof(double)) == 0);
}

TEST_CASE("error paths") {
    Tape t;
    TensorId a = t.leaf(2, 2, true);
    TensorId b = t.leaf(2, 3, true);

    CHECK_THROWS_AS((void)t.add(a, b), std::invalid_argument);   // shape mismatch
    CHECK_THROWS_AS((void)t.matmul(b, b), std::invalid_argument);  // inner mismatch

    fill(t, a, {1.0, std::nan(""), 0.0, 0.0});
    CHECK_THROWS_AS((void)t.softmax(a), std::domain_error);
    fill(t, a, {1.0, std::numeric_limits<double>::infinity(), 0.0, 0.0});
    CHECK_THROWS_AS((void)t.softmax(a), std::domain_error);

    fill(t, a, {0.5, 0.5, 0.5, 0.5});
    CHECK_THROWS_AS((void)t.cross_entropy(a, {0}), std::invalid_argument);     // count
    CHECK_THROWS_AS((void)t.cross_entropy(a, {0, 2}), std::out_of_range);      // range
    CHECK_THROWS_AS((void)t.cross_entropy(a, {0, -1}), std::out_of_range);

    CHECK_THROWS_AS(t.backward(a), std::invalid_argument);  // non-scalar root
    TensorId detached = t.sum(t.leaf(2, 2, false));
    CHECK_THROWS_AS(t.backward(detached), std::invalid_argument);  // no grad
    CHECK(t.grad(detached) == nullptr);
    CHECK_THROWS_AS((void)t.value(a), std::invalid_argument);  // not 1x1
}
