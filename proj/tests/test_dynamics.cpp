#include "sigprop/dynamics.hpp"
#include "sigprop/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

using namespace sigprop;

namespace {

const double kNinePiSqHalf = 4.5 * std::numbers::pi * std::numbers::pi;

double last_scaled(const Trajectory& t, double power) {
    return std::pow(double(t.layer.back()), power) * t.one_minus_c.back();
}

} // namespace

TEST_SUITE("dynamics") {

TEST_CASE("ordered relu network forgets its inputs") {
    const Trajectory t = propagate(2.0, 2.0, 0.1, 20, {1.0, 1.0}, Activation::relu());
    REQUIRE(t.size() == 20);
    CHECK(t.layer.front() == 1);
    CHECK(t.c.front() == doctest::Approx(0.1));
    CHECK(t.c.back() > 0.999);
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(t.qa[i] == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("ordered phase contracts 1 - c by chi1 per layer") {
    const Trajectory t = propagate(2.0, 2.0, 0.1, 120, {1.0, 1.0}, Activation::relu());
    CHECK(t.one_minus_c[100] / t.one_minus_c[99] == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("weak EOC preserves the variance") {
    const Trajectory t = propagate(1.0, 1.0, 0.3, 50, {0.0, 2.0}, Activation::relu());
    for (std::size_t i = 0; i < t.size(); ++i) {
        CHECK(t.qa[i] == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(t.qb[i] == doctest::Approx(1.0).epsilon(1e-15));
    }
    const Trajectory e = propagate_eoc(0.3, 50, weak_eoc(1.0, 0.0), Activation::relu(), {}, 3.5);
    CHECK(e.qa.back() == 3.5);
}

TEST_CASE("identical inputs stay identical") {
    const NetParams p = NetParams::from_sigmas(0.3, 1.1);
    const double q = variance_fixed_point(p, Activation::tanh()).q;
    const Trajectory t = propagate(q, q, 1.0, 40, p, Activation::tanh());
    for (std::size_t i = 0; i < t.size(); ++i) {
        CHECK(t.c[i] == 1.0);
        CHECK(t.one_minus_c[i] == 0.0);
    }
    CHECK(propagate_residual(1.0, 100, 1.0).one_minus_c.back() == 0.0);
}

TEST_CASE("orthogonal inputs stay orthogonal for an odd activation without bias") {
    const Trajectory t = propagate(1.0, 1.0, 0.0, 30, {0.0, 1.5}, Activation::tanh());
    for (double c : t.c) CHECK(std::abs(c) < 1e-14);
}

TEST_CASE("diverging variance truncates the trajectory") {
    const Trajectory t = propagate(1.0, 1.0, 0.5, 200, {1.0, 4.0}, Activation::relu());
    CHECK(t.diverged);
    CHECK(t.size() < 200);
}

TEST_CASE("relu EOC correlation law") {
    const Trajectory t = propagate_eoc(0.1, 100000, weak_eoc(1.0, 0.0), Activation::relu());
    CHECK(last_scaled(t, 2.0) == doctest::Approx(kNinePiSqHalf).epsilon(0.05));
    // monotone increasing in l beyond the transient, strictly below 1
    double prev = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        CHECK(t.one_minus_c[i] > 0.0);
        if (i > 0) CHECK(t.c[i] > t.c[i - 1]);
        if (t.layer[i] >= 100 && t.layer[i] % 1000 == 0) {
            const double v = double(t.layer[i]) * double(t.layer[i]) * t.one_minus_c[i];
            CHECK(v >= prev);
            prev = v;
        }
    }
    const DecayFit fit = fit_decay(t, 1000, 100000);
    CHECK(fit.kind == DecayKind::power);
    CHECK(fit.power.slope == doctest::Approx(-2.0).epsilon(0.025));
}

TEST_CASE("smooth activation on the EOC decays like beta_q / l") {
    const Activation tanh = Activation::tanh();
    const EocPoint e = eoc_point(0.2, tanh);
    const Trajectory t = propagate_eoc(0.1, 3000, e, tanh);
    const DecayFit fit = fit_decay(t, 300, 3000);
    CHECK(fit.kind == DecayKind::power);
    CHECK(fit.power.slope == doctest::Approx(-1.0).epsilon(0.05));
    CHECK(last_scaled(t, 1.0) / *e.beta_q == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("propagate at the fixed point agrees with propagate_eoc") {
    const Activation tanh = Activation::tanh();
    const EocPoint e = eoc_point(0.2, tanh);
    const Trajectory a = propagate(*e.q, *e.q, 0.1, 300, e.params, tanh);
    const Trajectory b = propagate_eoc(0.1, 300, e, tanh);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(std::abs(a.c[i] - b.c[i]) <= 1e-12);
        CHECK(a.one_minus_c[i] == doctest::Approx(b.one_minus_c[i]).epsilon(1e-9));
    }
}

TEST_CASE("residual relu network") {
    // Each layer moves c by kappa (f(c) - c) with kappa = (w/2) / (1 + w/2),
    // so 1 - c_bar ~ 9 pi^2 / (2 kappa^2 l^2).
    for (double sw : {1.0, 2.0}) {
        const double w = sw * sw, kappa = (w / 2.0) / (1.0 + w / 2.0);
        const Trajectory t = propagate_residual(0.1, 100000, sw);
        CHECK(last_scaled(t, 2.0) == doctest::Approx(kNinePiSqHalf / (kappa * kappa)).epsilon(0.01));
        CHECK(t.qa[1] / t.qa[0] == doctest::Approx(1.0 + w / 2.0));
    }
    CHECK_THROWS_AS(propagate_residual(0.1, 10, 0.0), DomainError);
}

TEST_CASE("decay fits") {
    const Trajectory ordered = propagate(2.0, 2.0, 0.1, 80, {1.0, 1.0}, Activation::relu());
    const DecayFit fit = fit_decay(ordered, 5, 60);
    CHECK(fit.kind == DecayKind::exponential);
    CHECK(fit.slope == doctest::Approx(std::log(0.5)).epsilon(0.02));
    CHECK(fit.first == 5);
    CHECK(fit.last == 60);
    CHECK_THROWS_AS(fit_decay(ordered, 5, 10), DomainError);
    const DecayFit whole = fit_decay(ordered);
    CHECK(whole.first == 9);
}

TEST_CASE("trajectory CSV round trip") {
    const Trajectory t = propagate(1.3, 0.7, 0.2, 25, {0.1, 1.9}, Activation::elu());
    std::stringstream ss;
    write_trajectory_csv(ss, t);
    const std::string text = ss.str();
    CHECK(text.rfind("layer,q_a,q_b,c,one_minus_c\n", 0) == 0);
    const Trajectory back = read_trajectory_csv(ss);
    REQUIRE(back.size() == t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        CHECK(back.layer[i] == t.layer[i]);
        CHECK(back.c[i] == t.c[i]);
        CHECK(back.one_minus_c[i] == t.one_minus_c[i]);
        CHECK(back.qa[i] == t.qa[i]);
    }
    std::stringstream thin;
    write_trajectory_csv(thin, t, 10);
    const Trajectory kept = read_trajectory_csv(thin);
    CHECK(kept.layer == std::vector<long>{1, 11, 21, 25});

    std::stringstream bad("layer,c\n1,0.5\n");
    CHECK_THROWS_AS(read_trajectory_csv(bad), DomainError);
}

}
