#include "oracles.hpp"

#include "sigprop/errors.hpp"
#include "sigprop/meanfield.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace sigprop;

namespace {

std::vector<Activation> smooth_builtins() {
    return {Activation::tanh(),      Activation::elu(),        Activation::silu(),
            Activation::ssoftplus(), Activation::xtanh(0.5), Activation::msilu()};
}

} // namespace

TEST_SUITE("meanfield") {

TEST_CASE("variance map reference values") {
    const Activation relu = Activation::relu();
    CHECK(variance_map(2.0, {1.0, 1.0}, relu) == doctest::Approx(2.0).epsilon(1e-15));
    for (double x : {0.0, 0.3, 7.0}) CHECK(variance_map(x, {0.0, 2.0}, relu) == doctest::Approx(x).epsilon(1e-15).scale(1.0));
    for (const Activation& a : smooth_builtins()) CHECK(variance_map(0.0, {0.49, 3.0}, a) == doctest::Approx(0.49));
    CHECK_THROWS_AS(variance_map(-1.0, {0.0, 1.0}, relu), DomainError);
    CHECK_THROWS_AS(variance_map(1.0, {-1.0, 1.0}, relu), DomainError);
}

TEST_CASE("variance map agrees with a trapezoid oracle") {
    const Activation t = Activation::tanh();
    const NetParams p = NetParams::from_sigmas(0.3, 2.0);
    for (double x : {0.1, 1.0, 5.0, 20.0}) {
        const double want = p.sigma_b2 + p.sigma_w2 * oracle::trapezoid_moment([](double z) { return std::tanh(z) * std::tanh(z); }, x);
        CHECK(variance_map(x, p, t) == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("variance map is non-decreasing") {
    for (const Activation& a : smooth_builtins()) {
        double prev = variance_map(0.0, {0.1, 1.7}, a);
        for (int i = 1; i <= 1000; ++i) {
            const double v = variance_map(25.0 * i / 1000.0, {0.1, 1.7}, a);
            CHECK_MESSAGE(v - prev >= -1e-10, a.spec());
            prev = v;
        }
    }
}

TEST_CASE("fixed points") {
    const FixedPointReport relu = variance_fixed_point({1.0, 1.0}, Activation::relu());
    CHECK(relu.converged);
    CHECK(relu.q == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(relu.monotone);

    const NetParams p = NetParams::from_sigmas(0.3, 2.0);
    const FixedPointReport t = variance_fixed_point(p, Activation::tanh());
    REQUIRE(t.converged);
    CHECK(t.q > 0.0);
    CHECK(t.residual <= 1e-12);
    CHECK(std::abs(variance_map(t.q, p, Activation::tanh(), Numerics{}.doubled()) - t.q) <= 1e-12);

    const FixedPointReport div = variance_fixed_point({1.0, 4.0}, Activation::relu());
    CHECK_FALSE(div.converged);
}

TEST_CASE("chi1 reference values") {
    const Activation relu = Activation::relu();
    for (double q : {0.5, 2.0, 10.0}) CHECK(chi1(q, {1.0, 1.0}, relu) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(chi1(1.0, {0.0, 2.0}, relu) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(chi1(1.0, {0.0, 1.0}, Activation::relu_like(1.0, 0.5)) == doctest::Approx(0.625).epsilon(1e-15));
}

TEST_CASE("alpha equals the derivative of the variance map") {
    const double h = 1e-5;
    const NetParams p{1.0, 1.0};
    const Activation relu = Activation::relu_like(1.0, 0.3);
    CHECK(alpha_coef(2.0, p, relu) == doctest::Approx(chi1(2.0, p, relu)));
    for (const Activation& a : {Activation::tanh(), Activation::elu(), Activation::silu()}) {
        const double q = variance_fixed_point(p, a).q;
        const double fd = (variance_map(q + h, p, a) - variance_map(q - h, p, a)) / (2.0 * h);
        CHECK_MESSAGE(alpha_coef(q, p, a) == doctest::Approx(fd).epsilon(1e-7), a.spec());
    }
    const double q = variance_fixed_point(p, Activation::tanh()).q;
    CHECK(alpha_coef(q, p, Activation::tanh()) < 1.0);
}

TEST_CASE("alpha in the small-variance limit") {
    const NetParams p{0.0, 0.8};
    const Activation a = Activation::xtanh(0.5);
    CHECK(alpha_coef(1e-10, p, a) == doctest::Approx(0.8 * 2.25).epsilon(1e-8));
    CHECK(chi1(1e-10, p, a) == doctest::Approx(0.8 * 2.25).epsilon(1e-8));
}

TEST_CASE("depth scales") {
    CHECK(DepthScale::from(0.5).value == doctest::Approx(1.0 / std::log(2.0)));
    CHECK(DepthScale::from(1.0).kind == DepthScale::Kind::infinite);
    CHECK(DepthScale::from(1.3).kind == DepthScale::Kind::chaotic);
    const DepthScales relu = depth_scales(1.0, {0.0, 2.0}, Activation::relu());
    CHECK(relu.correlation.kind == DepthScale::Kind::infinite);
    const NetParams chaotic = NetParams::from_sigmas(0.3, 2.0);
    const double q = variance_fixed_point(chaotic, Activation::tanh()).q;
    CHECK(chi1(q, chaotic, Activation::tanh()) > 1.0);
    CHECK(depth_scales(q, chaotic, Activation::tanh()).correlation.kind == DepthScale::Kind::chaotic);
}

TEST_CASE("relu correlation map") {
    const NetParams eoc{0.0, 2.0};
    const Activation relu = Activation::relu();
    CHECK(correlation_map(0.0, 1.0, eoc, relu) == doctest::Approx(1.0 / std::numbers::pi).epsilon(1e-15));
    CHECK(correlation_map(1.0, 1.0, eoc, relu) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(correlation_map_prime(0.0, 1.0, eoc, relu) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(correlation_map_prime(1.0, 1.0, eoc, relu) == doctest::Approx(1.0).epsilon(1e-15));
    for (double x : {-0.8, 0.0, 0.3, 0.9, 0.999}) {
        const double closed = x * std::asin(x) / std::numbers::pi + std::sqrt(1.0 - x * x) / std::numbers::pi + 0.5 * x;
        CHECK(correlation_map(x, 1.0, eoc, relu) == doctest::Approx(closed).epsilon(1e-14));
    }
}

TEST_CASE("closed-form relu-like map agrees with quadrature") {
    const auto& eng = gauss::Engine::at(gauss::kDefaultOrder);
    const NetParams p{0.3, 1.4};
    const double lam = 1.0, beta = 0.2;
    const auto phi = [&](double z) { return z > 0.0 ? lam * z : beta * z; };
    const Activation act = Activation::relu_like(lam, beta);
    const double q = 1.7;
    for (int i = 0; i <= 100; ++i) {
        const double x = 0.999 * i / 100.0;
        const double quad = (p.sigma_b2 + p.sigma_w2 * eng.expect2(phi, phi, q, q, x)) / q;
        CHECK(correlation_map(x, q, p, act) == doctest::Approx(quad).epsilon(1e-12));
    }
}

TEST_CASE("correlation map properties at a fixed point") {
    const Numerics num;
    for (const Activation& a : {Activation::tanh(), Activation::elu(), Activation::silu()}) {
        const NetParams p = NetParams::from_sigmas(0.4, 1.2);
        const FixedPointReport fp = variance_fixed_point(p, a, num);
        REQUIRE(fp.converged);
        const CorrelationMap f(fp.q, p, a, num);
        CHECK(std::abs(f(1.0) - 1.0) <= 1e-10);
        CHECK(std::abs(f.prime(1.0) - chi1(fp.q, p, a, num)) <= 1e-8);
        double prev = f(0.0);
        for (int i = 1; i <= 200; ++i) {
            const double v = f(i / 200.0);
            CHECK(v >= prev - 1e-14);
            CHECK(v <= 1.0 + 1e-12);
            prev = v;
        }
    }
}

TEST_CASE("odd activation at the origin gives sigma_b^2 / q") {
    const NetParams p = NetParams::from_sigmas(0.2, 1.3);
    const double q = variance_fixed_point(p, Activation::tanh()).q;
    CHECK(correlation_map(0.0, q, p, Activation::tanh()) == doctest::Approx(0.04 / q).epsilon(1e-12));
}

TEST_CASE("correlation map derivative matches differences") {
    const NetParams p = NetParams::from_sigmas(0.2, 1.3);
    const Activation a = Activation::elu();
    const double q = variance_fixed_point(p, a).q;
    const CorrelationMap f(q, p, a);
    const double h = 1e-6;
    for (double x : {-0.5, 0.0, 0.4, 0.9})
        CHECK(f.prime(x) == doctest::Approx((f(x + h) - f(x - h)) / (2.0 * h)).epsilon(1e-7));
}

TEST_CASE("gap form agrees with the direct map where both are accurate") {
    const NetParams p = NetParams::from_sigmas(0.2, 1.3);
    for (const Activation& a : {Activation::tanh(), Activation::relu()}) {
        const double q = a.is_relu_like() ? 1.0 : variance_fixed_point(p, a).q;
        const NetParams pp = a.is_relu_like() ? NetParams{0.0, 2.0} : p;
        const CorrelationMap f(q, pp, a);
        for (double u : {0.5, 0.1, 0.01}) CHECK(f.gap(u) == doctest::Approx(f(1.0 - u) - (1.0 - u)).epsilon(1e-9));
        // tiny u: gap ~ (chi1 - 1)(-u) + O(u^2) or O(u^{3/2}); never sign-flipped by cancellation
        CHECK(f.gap(1e-12) >= -1e-12);
    }
}

TEST_CASE("correlation map rejects bad arguments") {
    CHECK_THROWS_AS(correlation_map(0.5, 0.0, {0.1, 1.0}, Activation::tanh()), DomainError);
    CHECK_THROWS_AS(correlation_map(1.5, 1.0, {0.0, 2.0}, Activation::relu()), DomainError);
}

TEST_CASE("variance ratio stays below the identity") {
    for (const Activation& a : smooth_builtins())
        for (double x : {0.01, 0.1, 1.0, 5.0, 25.0}) CHECK_MESSAGE(variance_ratio(x, a) < x, a.spec() << " x=" << x);
    for (double x : {0.01, 1.0, 25.0})
        CHECK(variance_ratio(x, Activation::relu_like(1.0, 0.3)) == doctest::Approx(x).epsilon(1e-12));
}

TEST_CASE("convergence bounds") {
    std::vector<double> g;
    for (int i = 1; i <= 50; ++i) g.push_back(0.1 * i);
    const ConvergenceBounds relu = convergence_bounds(Activation::relu(), g, 0.1);
    CHECK(relu.m_phi == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(relu.c_phi_delta <= 1.0 + 1e-12);
    const ConvergenceBounds lin = convergence_bounds(Activation::linear(), g, 0.1);
    CHECK(lin.m_phi == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(lin.sigma_w2_limit() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(lin.certifies(0.9));
    CHECK_FALSE(lin.certifies(1.1));
    const ConvergenceBounds t = convergence_bounds(Activation::tanh(), g, 0.1);
    CHECK(t.m_phi > 0.0);
    CHECK(t.x_lo == 0.1);
    CHECK(t.x_hi == doctest::Approx(5.0));
}

}
