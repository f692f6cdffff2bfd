#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "des/rng.hpp"
#include "des/scheduler.hpp"
#include "testutil.hpp"

using namespace des;

TEST_CASE("gradient_row_norms is the row-wise l2 norm") {
    const std::vector<double> g = {3.0, 4.0, 0.0, 0.0, 0.0, 0.0, -1.0, 2.0, 2.0};
    const auto n = gradient_row_norms(g, 3, 3);
    REQUIRE(n.size() == 3);
    CHECK(n[0] == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(n[1] == 0.0);
    CHECK(n[2] == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("softmax_entropy closed-form values") {
    SUBCASE("uniform over k has entropy ln k") {
        const auto h2 = softmax_entropy({0.5, 0.5}, 1, 2);
        CHECK(h2[0] == doctest::Approx(0.6931471805599453).epsilon(1e-14));
        const auto h4 = softmax_entropy({0.25, 0.25, 0.25, 0.25}, 1, 4);
        CHECK(h4[0] == doctest::Approx(1.3862943611198906).epsilon(1e-14));
    }
    SUBCASE("mixed row") {
        const auto h = softmax_entropy({0.5, 0.25, 0.25}, 1, 3);
        // -0.5 ln 0.5 - 2 * 0.25 ln 0.25 = 1.5 ln 2
        CHECK(h[0] == doctest::Approx(1.0397207708399179).epsilon(1e-14));
    }
    SUBCASE("one-hot row has zero entropy (0 ln 0 = 0)") {
        const auto h = softmax_entropy({1.0, 0.0, 0.0}, 1, 3);
        CHECK(h[0] == 0.0);
    }
    SUBCASE("rows that are not distributions are rejected") {
        CHECK_THROWS_AS((void)softmax_entropy({0.5, 0.4}, 1, 2), std::domain_error);
        CHECK_THROWS_AS((void)softmax_entropy({-0.1, 1.1}, 1, 2), std::domain_error);
    }
    SUBCASE("a sum within 1e-9 of 1 is accepted") {
        const auto h = softmax_entropy({0.5 + 4e-10, 0.5}, 1, 2);
        CHECK(h[0] == doctest::Approx(0.6931471805599453).epsilon(1e-8));
    }
}

TEST_CASE("mc_uncertainty is the mean per-class population variance") {
    SUBCASE("maximally disagreeing passes give 0.25") {
        // two passes, one sample, two classes: [1,0] then [0,1]
        const std::vector<std::vector<double>> passes = {{1.0, 0.0}, {0.0, 1.0}};
        const auto u = mc_uncertainty(passes, 1, 2);
        CHECK(u[0] == doctest::Approx(0.25).epsilon(1e-15));
    }
    SUBCASE("identical passes give 0") {
        const std::vector<std::vector<double>> passes = {{0.3, 0.7}, {0.3, 0.7}, {0.3, 0.7}};
        const auto u = mc_uncertainty(passes, 1, 2);
        CHECK(u[0] == 0.0);
    }
    SUBCASE("hand-computed three-pass case") {
        // class 0: probs 0.2, 0.4, 0.6 -> mean 0.4, pop var = (0.04+0+0.04)/3
        // class 1 mirrors it, so u = mean of the two identical variances
        const std::vector<std::vector<double>> passes = {{0.2, 0.8}, {0.4, 0.6}, {0.6, 0.4}};
        const auto u = mc_uncertainty(passes, 1, 2);
        CHECK(u[0] == doctest::Approx(0.08 / 3.0).epsilon(1e-14));
    }
    SUBCASE("per-sample independence") {
        const std::vector<std::vector<double>> passes = {{1.0, 0.0, 0.3, 0.7},
                                                         {0.0, 1.0, 0.3, 0.7}};
        const auto u = mc_uncertainty(passes, 2, 2);
        CHECK(u[0] == doctest::Approx(0.25).epsilon(1e-15));
        CHECK(u[1] == 0.0);
    }
}

TEST_CASE("minmax_normalize maps to [0,1] and handles degenerate batches") {
    const auto n = minmax_normalize({2.0, 4.0, 3.0});
    CHECK(n[0] == 0.0);
    CHECK(n[1] == 1.0);
    CHECK(n[2] == doctest::Approx(0.5).epsilon(1e-15));

    // constant batch carries no information: everything maps to 0.5
    const auto flat = minmax_normalize({7.0, 7.0, 7.0});
    for (double v : flat) CHECK(v == 0.5);
    const auto near_flat = minmax_normalize({7.0, 7.0 + 1e-13});
    for (double v : near_flat) CHECK(v == 0.5);

    const auto single = minmax_normalize({42.0});
    CHECK(single[0] == 0.5);
}

TEST_CASE("fuse_difficulty is the convex combination, clamped to [0,1]") {
    const auto s = fuse_difficulty({0.6}, {0.3}, {0.9}, 1.0 / 3, 1.0 / 3, 1.0 / 3);
    CHECK(s[0] == doctest::Approx(0.6).epsilon(1e-12));

    const auto sg = fuse_difficulty({0.6}, {0.3}, {0.9}, 1.0, 0.0, 0.0);
    CHECK(sg[0] == 0.6);
    const auto sh = fuse_difficulty({0.6}, {0.3}, {0.9}, 0.0, 1.0, 0.0);
    CHECK(sh[0] == 0.3);
    const auto su = fuse_difficulty({0.6}, {0.3}, {0.9}, 0.0, 0.0, 1.0);
    CHECK(su[0] == 0.9);

    // values produced by normalization never exceed 1, but rounding in the
    // weighted sum is absorbed by the clamp
    const auto hi = fuse_difficulty({1.0}, {1.0}, {1.0}, 1.0 / 3, 1.0 / 3, 1.0 / 3);
    CHECK(hi[0] <= 1.0);
    CHECK(hi[0] >= 1.0 - 1e-12);
}

TEST_CASE("epsilon_budget affine map and domain checks") {
    const auto eps = epsilon_budget({0.0, 0.5, 1.0}, 0.05, 0.2);
    CHECK(eps[0] == doctest::Approx(0.05).epsilon(1e-15));
    CHECK(eps[1] == doctest::Approx(0.15).epsilon(1e-15));
    CHECK(eps[2] == doctest::Approx(0.25).epsilon(1e-15));

    // lambda = 0 collapses to the constant floor
    const auto flat = epsilon_budget({0.1, 0.9}, 0.07, 0.0);
    CHECK(flat[0] == 0.07);
    CHECK(flat[1] == 0.07);

    CHECK_THROWS_AS((void)epsilon_budget({-0.01}, 0.05, 0.2), std::domain_error);
    CHECK_THROWS_AS((void)epsilon_budget({1.01}, 0.05, 0.2), std::domain_error);
}

TEST_CASE("ScheduleConfig::validate enforces the weight simplex") {
    ScheduleConfig ok;
    CHECK_NOTHROW(ok.validate());

    ScheduleConfig c;
    c.alpha = 0.2;
    c.beta = 0.3;
    c.gamma = 0.5;
    CHECK_NOTHROW(c.validate());

    c.gamma = 0.6;  // sum 1.1
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c.gamma = 0.5;
    c.alpha = -0.2;
    c.beta = 0.7;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);  // negative weight
    c.alpha = 0.2;
    c.beta = 0.3;
    c.eps_min = -0.01;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c.eps_min = 0.05;
    c.lambda = -0.1;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c.lambda = 0.2;
    c.mc_passes = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c.mc_passes = 3;
    CHECK_NOTHROW(c.validate());
    // a sum off by less than 1e-9 passes
    c.alpha = 0.2 + 4e-10;
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("compute_schedule invariants on random batches") {
    const std::size_t m = 16, d = 3, k = 3;
    const Mlp net = testutil::random_net(d, {10}, k, 0.2, 101);
    const testutil::RandomBatch batch = testutil::random_batch(m, d, k, 102);
    ScheduleConfig cfg;
    cfg.eps_min = 0.04;
    cfg.lambda = 0.12;
    const ScheduleResult r = compute_schedule(net, batch.x.data(), m, batch.labels, cfg, 555);

    REQUIRE(r.scores.sigma.size() == m);
    REQUIRE(r.scores.eps.size() == m);
    REQUIRE(r.grad_x.size() == m * d);
    REQUIRE(r.probs.size() == m * k);
    const double lnk = std::log(static_cast<double>(k));
    for (std::size_t i = 0; i < m; ++i) {
        CHECK(r.scores.sigma[i] >= 0.0);
        CHECK(r.scores.sigma[i] <= 1.0);
        CHECK(r.scores.eps[i] >= cfg.eps_min);
        CHECK(r.scores.eps[i] <= cfg.eps_min + cfg.lambda);
        CHECK(r.scores.g[i] >= 0.0);
        CHECK(r.scores.h[i] >= -1e-15);
        CHECK(r.scores.h[i] <= lnk + 1e-9);
        CHECK(r.scores.u[i] >= 0.0);
        CHECK(r.scores.u[i] <= 0.25 + 1e-12);
        CHECK(r.scores.g_norm[i] >= 0.0);
        CHECK(r.scores.g_norm[i] <= 1.0);
        CHECK(r.scores.eps[i] ==
              doctest::Approx(cfg.eps_min + cfg.lambda * r.scores.sigma[i]).epsilon(1e-15));
    }

    // the raw gradient signal agrees with the returned gradient rows
    const auto norms = gradient_row_norms(r.grad_x, m, d);
    for (std::size_t i = 0; i < m; ++i)
        CHECK(r.scores.g[i] == doctest::Approx(norms[i]).epsilon(1e-15));
    // the raw entropy signal agrees with the returned probabilities
    const auto ent = softmax_entropy(r.probs, m, k);
    for (std::size_t i = 0; i < m; ++i)
        CHECK(r.scores.h[i] == doctest::Approx(ent[i]).epsilon(1e-15));
}

TEST_CASE("compute_schedule is reproducible and mc-seed sensitive") {
    const std::size_t m = 8, d = 2, k = 2;
    const Mlp net = testutil::random_net(d, {12}, k, 0.3, 111);
    const testutil::RandomBatch batch = testutil::random_batch(m, d, k, 112);
    ScheduleConfig cfg;

    const ScheduleResult a = compute_schedule(net, batch.x.data(), m, batch.labels, cfg, 7);
    const ScheduleResult b = compute_schedule(net, batch.x.data(), m, batch.labels, cfg, 7);
    CHECK(a.scores.eps == b.scores.eps);
    CHECK(a.scores.sigma == b.scores.sigma);

    const ScheduleResult c = compute_schedule(net, batch.x.data(), m, batch.labels, cfg, 8);
    CHECK(a.scores.u != c.scores.u);  // different mc draws
    CHECK(a.scores.g == c.scores.g);  // deterministic pass unaffected
    CHECK(a.scores.h == c.scores.h);

    // without dropout the mc signal is degenerate: every pass coincides, the
    // variance is exactly 0, and normalization pins u_norm at 0.5
    const Mlp plain = testutil::random_net(d, {12}, k, 0.0, 113);
    const ScheduleResult p = compute_schedule(plain, batch.x.data(), m, batch.labels, cfg, 7);
    for (std::size_t i = 0; i < m; ++i) {
        CHECK(p.scores.u[i] == 0.0);
        CHECK(p.scores.u_norm[i] == 0.5);
    }
}

TEST_CASE("factor csv layout") {
    FactorScores s;
    s.g = {1.0};
    s.h = {2.0};
    s.u = {3.0};
    s.g_norm = {0.5};
    s.h_norm = {0.25};
    s.u_norm = {0.75};
    s.sigma = {0.5};
    s.eps = {0.15};
    std::ostringstream os;
    write_factor_csv(os, s);
    CHECK(os.str() ==
          "sample_index,g,h,u,g_norm,h_norm,u_norm,sigma,eps\n"
          "0,1,2,3,0.5,0.25,0.75,0.5,0.15\n");
}
