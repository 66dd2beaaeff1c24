#include "sigprop/meanfield.hpp"

#include "relu_kernel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace sigprop {

namespace {

const gauss::Engine& engine(const Numerics& num) { return gauss::Engine::at(num.quad_order); }

double relu_k(const ReluSlopes& s) { return 0.5 * (s.lambda * s.lambda + s.beta * s.beta); }

} // namespace

double NetParams::sigma_b() const { return std::sqrt(sigma_b2); }
double NetParams::sigma_w() const { return std::sqrt(sigma_w2); }

void NetParams::validate() const {
    if (!std::isfinite(sigma_b2) || sigma_b2 < 0.0) throw DomainError("sigma_b^2 must be finite and >= 0");
    if (!std::isfinite(sigma_w2) || !(sigma_w2 > 0.0)) throw DomainError("sigma_w^2 must be finite and > 0");
}

double variance_map(double x, const NetParams& p, const Activation& act, const Numerics& num) {
    p.validate();
    if (!(x >= 0.0)) throw DomainError(fmt::format("variance_map: x = {} < 0", x));
    if (auto s = act.relu_slopes()) return p.sigma_b2 + p.sigma_w2 * relu_k(*s) * x;
    return p.sigma_b2 + p.sigma_w2 * moment(act, Deriv::d0, Deriv::d0, x, engine(num));
}

FixedPointReport variance_fixed_point(const NetParams& p, const Activation& act, const Numerics& num) {
    p.validate();
    FixedPointReport r;
    double q = 0.0;
    for (long it = 1; it <= num.max_iter; ++it) {
        const double next = variance_map(q, p, act, num);
        const double step = next - q;
        r.iterations = it;
        if (step < 0.0) r.monotone = false;
        q = next;
        if (!std::isfinite(q) || q > num.diverge_at) break;
        if (std::abs(step) <= num.tol * std::max(1.0, q)) {
            r.converged = true;
            break;
        }
    }
    r.q = q;
    r.residual = std::isfinite(q) ? std::abs(variance_map(q, p, act, num) - q) : q;
    return r;
}

double chi1(double q, const NetParams& p, const Activation& act, const Numerics& num) {
    p.validate();
    if (!(q >= 0.0)) throw DomainError("chi1: q must be >= 0");
    if (auto s = act.relu_slopes()) return p.sigma_w2 * relu_k(*s);
    return p.sigma_w2 * moment(act, Deriv::d1, Deriv::d1, q, engine(num));
}

double alpha_coef(double q, const NetParams& p, const Activation& act, const Numerics& num) {
    p.validate();
    if (!(q >= 0.0)) throw DomainError("alpha_coef: q must be >= 0");
    // The point mass of phi'' sits at 0 where phi vanishes, so it adds nothing.
    if (act.relu_slopes()) return chi1(q, p, act, num);
    return chi1(q, p, act, num) + p.sigma_w2 * moment(act, Deriv::d2, Deriv::d0, q, engine(num));
}

DepthScale DepthScale::from(double arg) {
    if (std::abs(arg - 1.0) <= 1e-12) return {Kind::infinite, std::numeric_limits<double>::infinity()};
    if (arg > 1.0) return {Kind::chaotic, std::numeric_limits<double>::quiet_NaN()};
    if (arg <= 0.0) return {Kind::finite, 0.0};
    return {Kind::finite, -1.0 / std::log(arg)};
}

DepthScales depth_scales(double q, const NetParams& p, const Activation& act, const Numerics& num) {
    return {DepthScale::from(alpha_coef(q, p, act, num)), DepthScale::from(chi1(q, p, act, num))};
}

double variance_ratio(double x, const Activation& act, const Numerics& num) {
    if (!(x >= 0.0)) throw DomainError("variance_ratio: x must be >= 0");
    const gauss::Engine& eng = engine(num);
    const double den = moment(act, Deriv::d1, Deriv::d1, x, eng);
    if (!(den > 0.0)) throw DomainError(fmt::format("E[phi'^2] vanishes at x = {}", x));
    return moment(act, Deriv::d0, Deriv::d0, x, eng) / den;
}

CorrelationMap::CorrelationMap(double q, const NetParams& p, const Activation& act, const Numerics& num)
    : q_(q), p_(p), act_(act), eng_(&engine(num)), mode_(Mode::quadrature) {
    p.validate();
    if (act.relu_slopes() && (q > 0.0 || (q == 0.0 && p.sigma_b2 == 0.0))) {
        mode_ = Mode::closed_form;
        return;
    }
    if (q == 0.0 && p.sigma_b2 == 0.0) {
        // q -> 0 limit: phi(sqrt(q) z) ~ phi'(0) sqrt(q) z.
        mode_ = Mode::small_variance;
        const double d = act.phi1(0.0);
        slope0_ = p.sigma_w2 * d * d;
        return;
    }
    if (!(q > 0.0)) throw DomainError(fmt::format("correlation map needs q > 0, got {}", q));
    e_same_ = moment(act, Deriv::d0, Deriv::d0, q, *eng_);
}

double CorrelationMap::operator()(double x) const {
    x = gauss::clamp_correlation(x);
    switch (mode_) {
    case Mode::closed_form: {
        const ReluSlopes s = *act_.relu_slopes();
        const double d = s.lambda - s.beta;
        const double base = p_.sigma_b2 > 0.0 ? p_.sigma_b2 / q_ : 0.0;
        return base + p_.sigma_w2 * (d * d * relu_kernel::dfun(relu_kernel::theta(x)) + relu_k(s) * x);
    }
    case Mode::small_variance:
        return slope0_ * x;
    case Mode::quadrature:
        break;
    }
    return (p_.sigma_b2 + p_.sigma_w2 * moment2(act_, Deriv::d0, Deriv::d0, q_, q_, x, *eng_)) / q_;
}

double CorrelationMap::prime(double x) const {
    x = gauss::clamp_correlation(x);
    switch (mode_) {
    case Mode::closed_form: {
        const ReluSlopes s = *act_.relu_slopes();
        const double d = s.lambda - s.beta;
        return p_.sigma_w2 * (relu_k(s) - d * d * relu_kernel::theta(x) / (2.0 * std::numbers::pi));
    }
    case Mode::small_variance:
        return slope0_;
    case Mode::quadrature:
        break;
    }
    return p_.sigma_w2 * moment2(act_, Deriv::d1, Deriv::d1, q_, q_, x, *eng_);
}

double CorrelationMap::gap(double u) const {
    if (!(u >= 0.0 && u <= 2.0)) throw DomainError(fmt::format("gap: u = {} outside [0, 2]", u));
    switch (mode_) {
    case Mode::closed_form: {
        // Anchored at f(1) = 1, which holds exactly at the fixed point.
        const ReluSlopes s = *act_.relu_slopes();
        const double d = s.lambda - s.beta;
        const double chi = p_.sigma_w2 * relu_k(s);
        return (1.0 - chi) * u + p_.sigma_w2 * d * d * relu_kernel::dfun(relu_kernel::theta_from_gap(u));
    }
    case Mode::small_variance:
        return (slope0_ - 1.0) * (1.0 - u);
    case Mode::quadrature:
        break;
    }
    const double e = moment2(act_, Deriv::d0, Deriv::d0, q_, q_, 1.0 - u, *eng_);
    return u - p_.sigma_w2 * (e_same_ - e) / q_;
}

double correlation_map(double x, double q, const NetParams& p, const Activation& act, const Numerics& num) {
    return CorrelationMap(q, p, act, num)(x);
}

double correlation_map_prime(double x, double q, const NetParams& p, const Activation& act,
                             const Numerics& num) {
    return CorrelationMap(q, p, act, num).prime(x);
}

double ConvergenceBounds::sigma_w2_limit() const {
    const double m = std::max(m_phi, c_phi_delta);
    return m > 0.0 ? 1.0 / m : std::numeric_limits<double>::infinity();
}

ConvergenceBounds convergence_bounds(const Activation& act, const std::vector<double>& x_grid, double delta,
                                     const Numerics& num) {
    if (x_grid.empty()) throw DomainError("convergence_bounds: empty grid");
    if (!(delta > 0.0)) throw DomainError("convergence_bounds: delta must be > 0");
    for (double x : x_grid)
        if (!(x >= 0.0)) throw DomainError("convergence_bounds: grid values must be >= 0");

    const gauss::Engine& eng = engine(num);
    ConvergenceBounds b;
    b.delta = delta;
    b.x_lo = *std::min_element(x_grid.begin(), x_grid.end());
    b.x_hi = *std::max_element(x_grid.begin(), x_grid.end());

    const auto slopes = act.relu_slopes();
    for (double x : x_grid) {
        double m;
        if (slopes) {
            m = relu_k(*slopes);
        } else {
            m = eng.expect1(
                [&](double z) {
                    const double d1 = act.phi1(z);
                    return std::abs(d1 * d1 + act.phi2(z) * act.phi(z));
                },
                x * x);
        }
        b.m_phi = std::max(b.m_phi, m);
    }

    auto abs_d1 = [&](double z) { return std::abs(act.phi1(z)); };
    for (double x : x_grid) {
        std::vector<double> ys = {x, x + delta};
        if (x - delta >= 0.0) ys.push_back(x - delta);
        for (double y : x_grid)
            if (std::abs(y - x) <= delta) ys.push_back(y);
        for (double y : ys) {
            for (int k = 0; k <= 10; ++k) {
                const double c = 0.1 * k;
                double v;
                if (slopes) {
                    const double t = relu_kernel::theta(c);
                    const double l = slopes->lambda, be = slopes->beta;
                    v = ((l * l + be * be) * (std::numbers::pi - t) + 2.0 * std::abs(l * be) * t) /
                        (2.0 * std::numbers::pi);
                } else {
                    v = eng.expect2(abs_d1, abs_d1, x * x, y * y, c);
                }
                b.c_phi_delta = std::max(b.c_phi_delta, v);
            }
        }
    }
    return b;
}

} // namespace sigprop
