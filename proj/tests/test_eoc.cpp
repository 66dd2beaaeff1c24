#include "oracles.hpp"

#include "sigprop/eoc.hpp"
#include "sigprop/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace sigprop;

namespace {

double sech2(double x) {
    const double t = std::tanh(x);
    return (1.0 - t) * (1.0 + t);
}

} // namespace

TEST_SUITE("eoc") {

TEST_CASE("weak EOC of piecewise-linear activations") {
    const EocPoint relu = weak_eoc(1.0, 0.0);
    CHECK(relu.weak);
    CHECK(relu.sigma_b == 0.0);
    CHECK(relu.sigma_w == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    CHECK_FALSE(relu.q);
    CHECK_FALSE(relu.beta_q);
    CHECK(weak_eoc(1.0, 1.0).sigma_w == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(weak_eoc(2.0, 0.0).sigma_w == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
    CHECK(weak_eoc(1.0, 0.0).params.sigma_w2 == 2.0);

    const EocPoint via = eoc_point(0.0, Activation::relu());
    CHECK(via.weak);
    CHECK_THROWS_AS(eoc_point(0.1, Activation::relu()), NoEocError);
}

TEST_CASE("tanh EOC matches an independent trapezoid and bisection solver") {
    const auto phi = [](double z) { return std::tanh(z); };
    const auto dphi = [](double z) { return sech2(z); };
    for (double sb : {0.05, 0.2, 0.5}) {
        const EocPoint e = eoc_point(sb, Activation::tanh());
        REQUIRE(e.q);
        const double q = oracle::eoc_variance(phi, dphi, sb);
        CHECK(*e.q == doctest::Approx(q).epsilon(1e-9));
        const double v1 = oracle::trapezoid_moment([&](double z) { return dphi(z) * dphi(z); }, q);
        CHECK(e.sigma_w == doctest::Approx(1.0 / std::sqrt(v1)).epsilon(1e-9));
    }
}

TEST_CASE("frozen reference values") {
    // Computed with adaptive quadrature and a bracketing root finder outside this code base.
    const EocPoint t05 = eoc_point(0.05, Activation::tanh());
    CHECK(*t05.q == doctest::Approx(0.15369193581894816).epsilon(1e-8));
    CHECK(*t05.beta_q == doctest::Approx(39.282).epsilon(1e-4));
    const EocPoint t02 = eoc_point(0.2, Activation::tanh());
    CHECK(*t02.q == doctest::Approx(0.51208).epsilon(1e-4));
    CHECK(t02.sigma_w == doctest::Approx(1.30415).epsilon(1e-5));
    CHECK(*t02.beta_q == doctest::Approx(7.0837).epsilon(1e-4));
}

TEST_CASE("every returned point is a critical initialization") {
    const Numerics fine = Numerics{}.doubled();
    for (const Activation& a : {Activation::tanh(), Activation::elu(), Activation::xtanh(0.5)})
        for (double sb : {0.01, 0.1, 0.4, 1.0}) {
            const EocPoint e = eoc_point(sb, a);
            REQUIRE(e.q);
            CHECK(std::abs(chi1(*e.q, e.params, a, fine) - 1.0) <= 1e-8);
            CHECK(std::abs(variance_map(*e.q, e.params, a, fine) - *e.q) <= 1e-10 * std::max(1.0, *e.q));
        }
}

TEST_CASE("zero-bias points of smooth activations") {
    const EocPoint s = eoc_point(0.0, Activation::ssoftplus());
    CHECK(s.sigma_w == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(*s.q == 0.0);
    CHECK(std::isinf(*s.beta_q));
    CHECK(eoc_point(0.0, Activation::tanh()).sigma_w == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(eoc_point(0.0, Activation::silu()).sigma_w == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("tanh EOC tends to (0, 1) as sigma_b vanishes") {
    double prev_gap = INFINITY;
    for (double sb : {0.05, 0.01, 0.001}) {
        const double gap = eoc_point(sb, Activation::tanh()).sigma_w - 1.0;
        CHECK(gap > 0.0);
        CHECK(gap < prev_gap);
        prev_gap = gap;
    }
    CHECK(prev_gap < 0.01);
}

TEST_CASE("activations with only the trivial point") {
    CHECK_THROWS_AS(eoc_point(0.3, Activation::ssoftplus()), NoEocError);
    CHECK_THROWS_AS(eoc_point(0.05, Activation::silu()), NoEocError);
    CHECK_NOTHROW(eoc_point(0.8, Activation::silu()));
}

TEST_CASE("sign change of E[phi'' phi] locates the trivial regime") {
    CHECK_FALSE(trivial_eoc_boundary(Activation::tanh()));
    CHECK_FALSE(trivial_eoc_boundary(Activation::ssoftplus()));
    const auto silu = trivial_eoc_boundary(Activation::silu());
    REQUIRE(silu);
    CHECK(*silu > 0.0);
    CHECK(*silu < 25.0);
}

TEST_CASE("variance and beta_q trends along the curve") {
    const Activation t = Activation::tanh();
    CHECK(*eoc_point(0.001, t).q < *eoc_point(0.01, t).q);
    CHECK(*eoc_point(0.01, t).q < *eoc_point(0.1, t).q);
    const double b01 = *eoc_point(0.01, t).beta_q, b05 = *eoc_point(0.05, t).beta_q, b1 = *eoc_point(0.1, t).beta_q,
                 b2 = *eoc_point(0.2, t).beta_q;
    CHECK(b01 > b05);
    CHECK(b05 > b1);
    CHECK(b1 > b2);
    for (const Activation& a : {Activation::tanh(), Activation::elu()}) CHECK(*eoc_point(0.01, a).q < *eoc_point(0.1, a).q);
}

TEST_CASE("the curve is continuous in sigma_b") {
    const Activation t = Activation::tanh();
    for (int i = 0; i <= 20; ++i) {
        const double sb = 0.01 + 0.99 * i / 20.0;
        CHECK(std::abs(eoc_point(sb, t).sigma_w - eoc_point(sb + 1e-4, t).sigma_w) <= 1e-2);
    }
}

TEST_CASE("sigma_max") {
    CHECK(sigma_max(Activation::tanh()).unbounded);
    const SigmaMax e100 = sigma_max(Activation::elu(), 100.0);
    const SigmaMax e50 = sigma_max(Activation::elu(), 50.0);
    CHECK_FALSE(e100.unbounded);
    CHECK(e100.value > 0.0);
    CHECK(e100.value >= e50.value);
    CHECK_THROWS_AS(sigma_max(Activation::relu()), UnsupportedError);
}

TEST_CASE("beta_q") {
    CHECK_THROWS_AS(beta_q(1.0, Activation::linear()), UnsupportedError);
    const double q = 0.01;
    CHECK(beta_q(q, Activation::msilu()) > beta_q(q, Activation::silu()));
    // direct definition with trapezoid moments
    const double num = oracle::trapezoid_moment([](double z) { return sech2(z) * sech2(z); }, 0.5);
    const double den = oracle::trapezoid_moment([](double z) { const double v = -2.0 * std::tanh(z) * sech2(z); return v * v; }, 0.5);
    CHECK(beta_q(0.5, Activation::tanh()) == doctest::Approx(2.0 * num / (0.5 * den)).epsilon(1e-10));
}

TEST_CASE("choose_sigma_b matches the bisection tolerance") {
    const SigmaBChoice c = choose_sigma_b(30.0, Activation::tanh());
    REQUIRE(c.point.beta_q);
    CHECK(std::abs(*c.point.beta_q - 30.0) <= 0.5);
    CHECK(c.table.size() >= 2);
    CHECK_THROWS_AS(choose_sigma_b(1e9, Activation::tanh()), BracketError);
    CHECK_THROWS_AS(choose_sigma_b(0.5, Activation::tanh()), DomainError);
}

TEST_CASE("max_depth") {
    CHECK(max_depth(50.0, 0.1, 0.1) == 40);
    CHECK(max_depth(50.0, 0.0, 1.0 - 1e-12) == 0);
    const double b = *eoc_point(0.05, Activation::tanh()).beta_q;
    CHECK(max_depth(b, 0.5, 0.1) == long(std::floor(b * 0.4)));
    CHECK_THROWS_AS(max_depth(50.0, 0.5, 0.6), DomainError);
    CHECK_THROWS_AS(max_depth(-1.0, 0.5, 0.1), DomainError);
}

TEST_CASE("EOC semi-norm") {
    std::vector<double> y;
    for (int i = 0; i <= 200; ++i) y.push_back(1e-4 * std::pow(25.0 / 1e-4, i / 200.0));
    CHECK(eoc_seminorm(Activation::linear(), y) == 0.0);
    const double a5 = eoc_seminorm(Activation::xtanh(0.5), y), a1 = eoc_seminorm(Activation::xtanh(0.1), y),
                 a01 = eoc_seminorm(Activation::xtanh(0.01), y);
    CHECK(a5 > a1);
    CHECK(a1 > a01);
    CHECK(a01 < 1e-3);
    const double t = eoc_seminorm(Activation::tanh(), y);
    CHECK(t > 0.0);
    CHECK(std::isfinite(t));
}

TEST_CASE("deviation of f from the identity is bounded by 1/beta_q") {
    for (const Activation& a : {Activation::tanh(), Activation::elu()}) {
        const GapReport r = check_prop4(a, 0.2, {}, 401);
        CHECK(r.holds);
        CHECK(r.sup_gap <= r.bound);
    }
    const GapReport t = check_prop4(Activation::tanh(), 0.05, {}, 401);
    CHECK(t.sup_gap <= 0.02);
}

}
