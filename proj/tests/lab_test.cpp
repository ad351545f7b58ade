#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <vector>

#include "lrc/data.hpp"
#include "lrc/errors.hpp"
#include "lrc/lab.hpp"
#include "lrc/losses.hpp"
#include "lrc/network.hpp"
#include "lrc/rng.hpp"
#include "lrc/tensor.hpp"

using namespace lrc;

namespace {

Network small_net(std::size_t d, std::size_t c, std::uint64_t seed) {
    Prng p(seed + seed_role::init);
    return init_network(MlpConfig{d, {4}, c}, p);
}

}  // namespace

TEST_CASE("singleton class has near-zero sign correlation") {
    Prng data_rng(40);
    std::vector<double> h(8);
    for (auto& v : h) v = data_rng.next_gaussian();
    Prng p(41);
    const RcEstimate est = estimate_global_rc({h}, 4000, p);
    CHECK(est.sigma_samples == 4000);
    CHECK(est.std_error > 0.0);
    CHECK(std::abs(est.value) <= 4.0 * est.std_error);
}

TEST_CASE("the pair {h, -h} on one point has correlation |h| exactly") {
    const double a = 0.7;
    Prng p(1);
    const RcEstimate mc = estimate_global_rc({{a}, {-a}}, 500, p);
    CHECK(mc.value == doctest::Approx(a).epsilon(1e-12));
    CHECK(mc.std_error == doctest::Approx(0.0));
    const RcEstimate ex = enumerate_global_rc({{a}, {-a}});
    CHECK(ex.value == doctest::Approx(a).epsilon(1e-12));
    CHECK(ex.std_error == 0.0);
    CHECK(ex.sigma_samples == 2);
}

TEST_CASE("Monte-Carlo matches enumeration on a small random class") {
    Prng data_rng(50);
    std::vector<std::vector<double>> cls(5, std::vector<double>(10));
    for (auto& member : cls) {
        for (auto& v : member) v = data_rng.next_gaussian();
    }
    const RcEstimate exact = enumerate_global_rc(cls);
    Prng p(51);
    const RcEstimate mc = estimate_global_rc(cls, 20000, p);
    CHECK(std::abs(mc.value - exact.value) < 4.0 * mc.std_error);
}

TEST_CASE("enumeration rejects batches past 20 sign slots") {
    CHECK_THROWS_AS(enumerate_global_rc({std::vector<double>(21, 1.0)}), CapacityError);
}

TEST_CASE("function class validation") {
    Prng p(1);
    CHECK_THROWS_AS(estimate_global_rc({}, 10, p), std::invalid_argument);
    CHECK_THROWS_AS(estimate_global_rc({{1.0, 2.0}, {1.0}}, 10, p), std::invalid_argument);
    CHECK_THROWS_AS(estimate_global_rc({{1.0}}, 0, p), std::invalid_argument);
}

TEST_CASE("growing the ball never shrinks the estimated local sup") {
    Prng gen(60);
    const Dataset batch = gen_blobs(2, 8, 2, 0.3, gen);
    const Network net = small_net(2, 2, 7);

    const auto run = [&](std::size_t members) {
        EstimateBudgets b;
        b.sigma_samples = 300;
        b.ball_samples = members;
        Prng p(99);
        return estimate_lrc_margin(net, 0.5, batch, 1.0, b, p);
    };
    const RcEstimate small = run(4);
    const RcEstimate big = run(16);
    // Same member prefix and identical sign draws: each per-draw sup is
    // over a superset, so the average cannot decrease.
    CHECK(big.value >= small.value - 1e-12);
    CHECK(big.ball_samples == 16);
}

TEST_CASE("estimates are invariant to the thread count") {
    Prng gen(61);
    const Dataset batch = gen_blobs(3, 6, 2, 0.3, gen);
    const Network net = small_net(2, 3, 8);
    const auto run = [&](std::size_t threads) {
        EstimateBudgets b;
        b.sigma_samples = 400;
        b.ball_samples = 8;
        b.threads = threads;
        Prng p(123);
        return estimate_lrc_ce(net, 0.3, batch, b, p);
    };
    const RcEstimate one = run(1);
    const RcEstimate four = run(4);
    CHECK(one.value == four.value);
    CHECK(one.std_error == four.std_error);
}

TEST_CASE("estimator rejects mismatched batch dimensions") {
    Prng gen(62);
    const Dataset batch = gen_blobs(2, 4, 3, 0.3, gen);  // d = 3
    const Network net = small_net(2, 2, 9);              // expects d = 2
    EstimateBudgets b;
    Prng p(1);
    CHECK_THROWS_AS(estimate_lrc_margin(net, 0.1, batch, 1.0, b, p), std::invalid_argument);
}

TEST_CASE("sigma enumeration rejects oversized batches") {
    Prng gen(63);
    const Dataset batch = gen_blobs(5, 5, 2, 0.3, gen);  // 25 rows
    const Network net = small_net(2, 5, 10);
    EstimateBudgets b;
    b.enumerate_sigma = true;
    b.ball_samples = 4;
    Prng p(1);
    CHECK_THROWS_AS(estimate_lrc_margin(net, 0.1, batch, 1.0, b, p), CapacityError);
}

TEST_CASE("plug-in network constants have the closed form for a linear model") {
    // Linear model: scores = x W + b. An offset touching only W[0][0]
    // by t changes score column 0 of row i by x_i0 t, so the ratio
    // per unit offset norm is max_i |x_i0|.
    const MlpConfig cfg{2, {}, 2};
    const Network net{cfg, Tensor({6}, {0.5, -0.25, 1.0, 0.75, 0.0, 0.0})};
    Dataset batch;
    batch.inputs = Tensor::matrix(3, 2, {2.0, 1.0, -3.0, 0.5, 1.5, -1.0});
    batch.labels = {0, 1, 0};
    batch.classes = 2;
    batch.name = "fixture";

    BallSample ball;
    ball.center = net.w;
    ball.radius = 0.2;
    ball.offsets.push_back(Tensor::zeros({6}));
    Tensor off = Tensor::zeros({6});
    off.data[0] = 0.2;  // W[0][0] only
    ball.offsets.push_back(off);

    const LipschitzEstimate lip = estimate_lipschitz(net, 0.2, batch, ball);
    CHECK(lip.l_hat == doctest::Approx(3.0));  // max |x_i0| = 3
    CHECK(lip.sample_count == 3);
    // Margin change for row i is [-2, 2] * x_i0 t depending on the label
    // side; the worst is |x| t = 0.6... bounded by 2 l_hat r.
    CHECK(lip.delta_margin <= 2.0 * lip.l_hat * 0.2 + 1e-12);
}

TEST_CASE("weight-only offsets cannot move scores when inputs are zero") {
    const MlpConfig cfg{2, {}, 2};
    const Network net{cfg, Tensor({6}, {0.1, 0.2, 0.3, 0.4, 0.0, 0.0})};
    Dataset batch;
    batch.inputs = Tensor::zeros({2, 2});
    batch.labels = {0, 1};
    batch.classes = 2;
    batch.name = "fixture";

    BallSample ball;
    ball.center = net.w;
    ball.radius = 1.0;
    ball.offsets.push_back(Tensor::zeros({6}));
    Tensor off = Tensor::zeros({6});
    off.data[0] = 0.5;
    off.data[3] = -0.5;  // weights only, biases untouched
    ball.offsets.push_back(off);

    const LipschitzEstimate lip = estimate_lipschitz(net, 1.0, batch, ball);
    CHECK(lip.l_hat == 0.0);
    CHECK(lip.delta_margin == 0.0);
}

TEST_CASE("margin deviation is deterministically within 2 l_hat r on sampled balls") {
    Prng gen(64);
    const Dataset batch = gen_blobs(3, 10, 2, 0.4, gen);
    const Network net = small_net(2, 3, 11);
    Prng ball_rng(65);
    const double r = 0.3;
    const BallSample ball = sample_ball(net.w, r, 24, ball_rng);
    const LipschitzEstimate lip = estimate_lipschitz(net, r, batch, ball);
    CHECK(lip.l_hat > 0.0);
    CHECK(lip.delta_margin <= 2.0 * lip.l_hat * r + 1e-12);
}

TEST_CASE("estimate_lipschitz demands a nonzero offset") {
    const MlpConfig cfg{2, {}, 2};
    const Network net{cfg, Tensor::zeros({6})};
    Dataset batch;
    batch.inputs = Tensor::zeros({1, 2});
    batch.labels = {0};
    batch.classes = 2;
    batch.name = "fixture";
    BallSample ball;
    ball.center = net.w;
    ball.radius = 1.0;
    ball.offsets.push_back(Tensor::zeros({6}));
    CHECK_THROWS_AS(estimate_lipschitz(net, 1.0, batch, ball), std::invalid_argument);
}

TEST_CASE("margin bound chain holds with enumerated signs") {
    Prng gen(70);
    const Dataset batch = gen_blobs(2, 6, 2, 0.4, gen);  // 12 rows
    const Network net = small_net(2, 2, 12);
    EstimateBudgets b;
    b.ball_samples = 12;
    b.enumerate_sigma = true;
    const BoundReport rep = verify_theorem1(net, 0.25, batch, 1.0, b, 77);
    CHECK(rep.theorem == 1);
    CHECK(rep.satisfied);
    CHECK(rep.lhs.std_error == 0.0);
    CHECK(rep.rhs == doctest::Approx(rep.first_term + rep.delta_margin / rep.gamma));
    CHECK(rep.margin_of_satisfaction == doctest::Approx(rep.rhs - rep.lhs.value));
    CHECK(rep.delta_margin <= 3.0 * rep.l_hat * rep.radius + 1e-9);
    CHECK(rep.statement_rhs == doctest::Approx(rep.statement_first_term +
                                               3.0 * rep.l_hat * rep.radius / rep.gamma));
    CHECK(rep.seed == 77);
    CHECK(rep.radius == 0.25);
}

TEST_CASE("margin bound chain holds with Monte-Carlo signs across gammas") {
    Prng gen(71);
    const Dataset batch = gen_blobs(3, 8, 2, 0.3, gen);
    const Network net = small_net(2, 3, 13);
    for (const double gamma : {0.5, 1.0, 2.0}) {
        CAPTURE(gamma);
        EstimateBudgets b;
        b.sigma_samples = 800;
        b.ball_samples = 16;
        const BoundReport rep = verify_theorem1(net, 0.2, batch, gamma, b, 78);
        CHECK(rep.satisfied);
        CHECK(rep.gamma == gamma);
    }
}

TEST_CASE("degenerate one-member ball still satisfies the margin chain") {
    Prng gen(72);
    const Dataset batch = gen_blobs(2, 5, 2, 0.4, gen);
    const Network net = small_net(2, 2, 14);
    EstimateBudgets b;
    b.sigma_samples = 200;
    b.ball_samples = 1;
    const BoundReport rep = verify_theorem1(net, 0.1, batch, 1.0, b, 79);
    CHECK(rep.satisfied);
    CHECK(rep.l_hat == 0.0);
    CHECK(rep.delta_margin == 0.0);
    CHECK(rep.perturbation_ratio == 0.0);
}

TEST_CASE("cross-entropy contraction chain holds with enumerated signs") {
    Prng gen(73);
    const Dataset batch = gen_blobs(2, 5, 2, 0.4, gen);  // 10 rows, c=2: both sides enumerable
    const Network net = small_net(2, 2, 15);
    EstimateBudgets b;
    b.ball_samples = 10;
    b.enumerate_sigma = true;
    const BoundReport rep = verify_theorem2(net, 0.25, batch, b, 80);
    CHECK(rep.theorem == 2);
    CHECK(rep.satisfied);
    CHECK(rep.lhs.std_error == 0.0);
    CHECK(rep.rhs_stderr == 0.0);
    // With zero noise the slack test collapses to lhs <= rhs.
    CHECK(rep.lhs.value <= rep.rhs + 1e-9);
    const double kappa = std::sqrt(2.0);  // c = 2
    CHECK(rep.statement_rhs ==
          doctest::Approx(rep.statement_first_term + 2.0 * kappa * rep.l_hat * rep.radius));
}

TEST_CASE("cross-entropy chain holds with Monte-Carlo signs on three classes") {
    Prng gen(74);
    const Dataset batch = gen_blobs(3, 6, 2, 0.3, gen);
    const Network net = small_net(2, 3, 16);
    EstimateBudgets b;
    b.sigma_samples = 1500;
    b.ball_samples = 12;
    const BoundReport rep = verify_theorem2(net, 0.2, batch, b, 81);
    CHECK(rep.satisfied);
    CHECK(rep.lhs.std_error > 0.0);
}

TEST_CASE("bound reports are reproducible from the seed") {
    Prng gen(75);
    const Dataset batch = gen_blobs(2, 6, 2, 0.3, gen);
    const Network net = small_net(2, 2, 17);
    EstimateBudgets b;
    b.sigma_samples = 300;
    b.ball_samples = 8;
    const BoundReport r1 = verify_theorem1(net, 0.15, batch, 1.0, b, 42);
    const BoundReport r2 = verify_theorem1(net, 0.15, batch, 1.0, b, 42);
    CHECK(r1.lhs.value == r2.lhs.value);
    CHECK(r1.rhs == r2.rhs);
    const BoundReport r3 = verify_theorem1(net, 0.15, batch, 1.0, b, 43);
    CHECK(r1.lhs.value != r3.lhs.value);
}

TEST_CASE("logsumexp1p values and Lipschitz premise") {
    CHECK(logsumexp1p({}) == 0.0);
    CHECK(logsumexp1p({0.0}) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(logsumexp1p({1000.0}) == doctest::Approx(1000.0).epsilon(1e-12));
    CHECK(logsumexp1p({-1000.0}) == doctest::Approx(0.0));
    // Against a direct sum for a moderate vector.
    CHECK(logsumexp1p({0.5, -0.25, 1.5}) ==
          doctest::Approx(std::log(1.0 + std::exp(0.5) + std::exp(-0.25) + std::exp(1.5)))
              .epsilon(1e-14));

    Prng p(87);
    const LipschitzPremiseReport rep = check_logsumexp1p_lipschitz(10000, 16, p);
    CHECK(rep.pass);
    CHECK(rep.pairs == 10000);
    CHECK(rep.max_ratio <= 1.0 + 1e-12);
    CHECK(rep.max_ratio > 0.1);  // the bound is actually exercised
}

TEST_CASE("report serializers expose the full bound anatomy") {
    Prng gen(76);
    const Dataset batch = gen_blobs(2, 4, 2, 0.3, gen);
    const Network net = small_net(2, 2, 18);
    EstimateBudgets b;
    b.sigma_samples = 100;
    b.ball_samples = 4;
    const BoundReport rep = verify_theorem2(net, 0.1, batch, b, 5);
    const auto j = bound_report_json(rep);
    for (const char* key : {"theorem", "lhs", "lhs_stderr", "first_term", "delta_margin", "l_hat",
                            "rhs", "satisfied", "margin_of_satisfaction", "statement_rhs",
                            "perturbation_ratio", "budgets", "seed"}) {
        CAPTURE(key);
        CHECK(j.contains(key));
    }
    CHECK(j["budgets"].contains("sigma_samples"));
    CHECK(j["budgets"].contains("r"));

    const auto ej = rc_estimate_json(rep.lhs);
    for (const char* key : {"value", "std_error", "sigma_samples", "ball_samples"}) {
        CHECK(ej.contains(key));
    }
}
