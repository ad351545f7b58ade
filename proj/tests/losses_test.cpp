#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "lrc/gradcheck.hpp"
#include "lrc/losses.hpp"
#include "lrc/rng.hpp"
#include "lrc/tape.hpp"
#include "lrc/tensor.hpp"

using namespace lrc;

namespace {
constexpr double kLn2 = 0.6931471805599453;
constexpr double kLn3 = 1.0986122886681098;
}  // namespace

TEST_CASE("phi is the clipped hinge transfer") {
    CHECK(phi(-5.0) == 1.0);
    CHECK(phi(-1e-12) == 1.0);
    CHECK(phi(0.0) == 1.0);
    CHECK(phi(0.25) == 0.75);
    CHECK(phi(1.0) == 0.0);
    CHECK(phi(7.0) == 0.0);
}

TEST_CASE("margins are score[y] minus the best other score") {
    const Tensor scores = Tensor::matrix(3, 3, {0, 1, 2, 0, 1, 2, 5, -1, -1});
    const std::vector<int> labels{0, 2, 0};
    const std::vector<double> m = margin_values(scores, labels);
    CHECK(m == std::vector<double>{-2.0, 1.0, 6.0});

    Tape tape;
    const int s = tape.leaf(scores, true);
    const int mn = margin(tape, s, labels);
    CHECK(tape.value(mn).data == std::vector<double>{-2.0, 1.0, 6.0});
}

TEST_CASE("margin is invariant to per-row score shifts") {
    const Tensor a = Tensor::matrix(2, 3, {0.3, -0.1, 0.9, 1.5, 0.2, -2.0});
    Tensor b = a;
    for (std::size_t j = 0; j < 3; ++j) {
        b.at(0, j) += 100.0;
        b.at(1, j) -= 7.0;
    }
    const std::vector<int> labels{1, 0};
    const std::vector<double> ma = margin_values(a, labels);
    const std::vector<double> mb = margin_values(b, labels);
    REQUIRE(ma.size() == mb.size());
    for (std::size_t i = 0; i < ma.size(); ++i) {
        CHECK(ma[i] == doctest::Approx(mb[i]).epsilon(1e-12));
    }
}

TEST_CASE("hinge loss value matches hand computation and stays in [0,1]") {
    // margins -2, 1, 0.5 at gamma 1: phi values 1, 0, 0.5.
    const Tensor scores = Tensor::matrix(3, 2, {0, 2, 2, 1, 1, 0.5});
    const std::vector<int> labels{0, 0, 0};
    CHECK(hinge_value(scores, labels, 1.0) == doctest::Approx((1.0 + 0.0 + 0.5) / 3.0));
    // gamma 4 rescales margins into the linear region.
    CHECK(hinge_value(scores, labels, 4.0) ==
          doctest::Approx((1.0 + (1 - 0.25) + (1 - 0.125)) / 3.0));

    Prng p(5);
    Tensor wide = Tensor::zeros({40, 3});
    std::vector<int> y(40);
    for (auto& v : wide.data) v = 10.0 * p.next_gaussian();
    for (auto& l : y) l = static_cast<int>(p.next_u64() % 3);
    const double h = hinge_value(wide, y, 0.5);
    CHECK(h >= 0.0);
    CHECK(h <= 1.0);
}

TEST_CASE("cross entropy matches frozen logarithm values") {
    SUBCASE("uniform two-way scores give ln 2") {
        CHECK(cross_entropy_value(Tensor::matrix(1, 2, {0.0, 0.0}), {0}) ==
              doctest::Approx(kLn2).epsilon(1e-14));
    }
    SUBCASE("score gap ln 3 gives ln 4 and ln 4/3") {
        const Tensor s = Tensor::matrix(1, 2, {0.0, kLn3});
        CHECK(cross_entropy_value(s, {0}) == doctest::Approx(2.0 * kLn2).epsilon(1e-14));
        CHECK(cross_entropy_value(s, {1}) ==
              doctest::Approx(2.0 * kLn2 - kLn3).epsilon(1e-12));
    }
    SUBCASE("large gaps stay finite and tiny tails keep precision") {
        CHECK(cross_entropy_value(Tensor::matrix(1, 2, {1000.0, 0.0}), {1}) ==
              doctest::Approx(1000.0).epsilon(1e-12));
        CHECK(cross_entropy_value(Tensor::matrix(1, 2, {20.0, 0.0}), {0}) ==
              doctest::Approx(2.061153620314381e-09).epsilon(1e-6));
    }
}

TEST_CASE("cross entropy is invariant to per-row shifts") {
    const Tensor a = Tensor::matrix(2, 4, {0.3, -0.1, 0.9, 0.0, 1.5, 0.2, -2.0, 0.7});
    Tensor b = a;
    for (std::size_t j = 0; j < 4; ++j) {
        b.at(0, j) += 300.0;
        b.at(1, j) -= 123.0;
    }
    const std::vector<int> labels{2, 1};
    CHECK(cross_entropy_value(a, labels) ==
          doctest::Approx(cross_entropy_value(b, labels)).epsilon(1e-12));
}

TEST_CASE("tape losses equal the value helpers for both kinds") {
    Prng p(11);
    Tensor scores = Tensor::zeros({7, 4});
    std::vector<int> labels(7);
    for (auto& v : scores.data) v = p.next_gaussian();
    for (auto& l : labels) l = static_cast<int>(p.next_u64() % 4);

    for (const LossKind kind : {LossKind::hinge(0.7), LossKind::cross_entropy()}) {
        Tape tape;
        const int s = tape.leaf(scores, true);
        const int node = loss_node(tape, s, labels, kind);
        CHECK(tape.value(node).value() ==
              doctest::Approx(loss_value(scores, labels, kind)).epsilon(1e-14));
    }
}

TEST_CASE("loss gradients match central differences away from kinks") {
    Prng p(3);
    Tensor scores0 = Tensor::zeros({6, 3});
    std::vector<int> labels(6);
    for (auto& v : scores0.data) v = p.next_gaussian();
    for (auto& l : labels) l = static_cast<int>(p.next_u64() % 3);

    SUBCASE("cross entropy is smooth everywhere") {
        const ScalarGradFn f = [&](const Tensor& w) {
            Tape tape;
            const int s = tape.leaf(w, true);
            const int node = cross_entropy_loss(tape, s, labels);
            const double v = tape.value(node).value();
            tape.backward(node);
            return std::make_pair(v, tape.grad(s));
        };
        const GradcheckReport rep = gradcheck(f, scores0, 1e-6, 1e-7);
        CAPTURE(rep.max_rel_error);
        CHECK(rep.pass);
    }
    SUBCASE("hinge away from clip boundaries and margin ties") {
        const double gamma = 10.0;  // margins land strictly inside (0, gamma)
        Tensor safe = scores0;
        for (std::size_t i = 0; i < safe.rows(); ++i) {
            safe.at(i, static_cast<std::size_t>(labels[i])) += 3.0;  // margin near 3, gap from ties
        }
        const ScalarGradFn f = [&](const Tensor& w) {
            Tape tape;
            const int s = tape.leaf(w, true);
            const int node = hinge_loss(tape, s, labels, gamma);
            const double v = tape.value(node).value();
            tape.backward(node);
            return std::make_pair(v, tape.grad(s));
        };
        const GradcheckReport rep = gradcheck(f, safe, 1e-6, 1e-7);
        CAPTURE(rep.max_rel_error);
        CHECK(rep.pass);
    }
}

TEST_CASE("score validation rejects malformed inputs") {
    const Tensor ok = Tensor::matrix(2, 2, {0, 1, 2, 3});
    CHECK_THROWS_AS(margin_values(Tensor::vector({1.0, 2.0}), {0}), std::invalid_argument);
    CHECK_THROWS_AS(margin_values(Tensor::matrix(2, 1, {0, 1}), {0, 0}), std::invalid_argument);
    CHECK_THROWS_AS(margin_values(ok, {0}), std::invalid_argument);            // count mismatch
    CHECK_THROWS_AS(margin_values(ok, {0, 2}), std::invalid_argument);         // label too large
    CHECK_THROWS_AS(margin_values(ok, {0, -1}), std::invalid_argument);        // negative label
    CHECK_THROWS_AS(hinge_value(ok, {0, 1}, 0.0), std::invalid_argument);      // bad gamma
    CHECK_THROWS_AS(LossKind::hinge(-1.0), std::invalid_argument);
}
