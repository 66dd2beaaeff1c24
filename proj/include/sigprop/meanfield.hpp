#pragma once

// One-layer kernel maps of a wide random network:
//   F(x) = sb2 + sw2 E[phi(sqrt(x) Z)^2]                        (variance)
//   f(x) = (sb2 + sw2 E[phi(sqrt(q) Z1) phi(sqrt(q) U2(x))]) / q   (correlation at the fixed point q)
// with U2(x) = x Z1 + sqrt(1 - x^2) Z2.

#include "sigprop/activations.hpp"
#include "sigprop/numerics.hpp"

#include <vector>

namespace sigprop {

struct NetParams {
    double sigma_b2 = 0.0;
    double sigma_w2 = 1.0;

    static NetParams from_sigmas(double sigma_b, double sigma_w) { return {sigma_b * sigma_b, sigma_w * sigma_w}; }
    double sigma_b() const;
    double sigma_w() const;
    void validate() const; // throws DomainError
};

struct FixedPointReport {
    double q = 0.0;
    long iterations = 0;
    double residual = 0.0; // |F(q) - q|
    bool converged = false;
    bool monotone = true; // iterates never decreased
};

double variance_map(double x, const NetParams& p, const Activation& act, const Numerics& num = {});

// Iterates q <- F(q) from 0; stops once |dq| <= tol * max(1, q).
FixedPointReport variance_fixed_point(const NetParams& p, const Activation& act, const Numerics& num = {});

double chi1(double q, const NetParams& p, const Activation& act, const Numerics& num = {});
double alpha_coef(double q, const NetParams& p, const Activation& act, const Numerics& num = {});

struct DepthScale {
    enum class Kind { finite, infinite, chaotic };
    Kind kind = Kind::finite;
    double value = 0.0; // -1/log(arg) when finite

    static DepthScale from(double arg);
};

struct DepthScales {
    DepthScale variance;    // from alpha
    DepthScale correlation; // from chi1
};

DepthScales depth_scales(double q, const NetParams& p, const Activation& act, const Numerics& num = {});

// e(x) = E[phi(sqrt(x) Z)^2] / E[phi'(sqrt(x) Z)^2].
double variance_ratio(double x, const Activation& act, const Numerics& num = {});

// f and f' at a given q, with quadrature tables and the x-independent
// moments hoisted out so it can be iterated cheaply.
class CorrelationMap {
public:
    CorrelationMap(double q, const NetParams& p, const Activation& act, const Numerics& num = {});

    double operator()(double x) const;
    double prime(double x) const;
    // f(1 - u) - (1 - u), evaluated without cancellation for small u.
    double gap(double u) const;

    double q() const { return q_; }
    const NetParams& params() const { return p_; }
    const Activation& activation() const { return act_; }

private:
    enum class Mode { closed_form, quadrature, small_variance };

    double q_;
    NetParams p_;
    Activation act_;
    const gauss::Engine* eng_;
    Mode mode_;
    double e_same_ = 0.0; // E[phi(sqrt(q) Z)^2]
    double slope0_ = 0.0; // small-variance limit slope sw2 phi'(0)^2
};

double correlation_map(double x, double q, const NetParams& p, const Activation& act, const Numerics& num = {});
double correlation_map_prime(double x, double q, const NetParams& p, const Activation& act,
                             const Numerics& num = {});

// Grid suprema (hence lower bounds) of
//   M   = sup_x E|phi'(xZ)^2 + phi''(xZ) phi(xZ)|
//   C_d = sup_{|x - y| <= d, c in [0,1]} E|phi'(x Z1) phi'(y U2(c))|
// where x, y are standard deviations.
struct ConvergenceBounds {
    double m_phi = 0.0;
    double c_phi_delta = 0.0;
    double x_lo = 0.0, x_hi = 0.0;
    double delta = 0.0;

    // sw2 below this contracts both maps (on the grid range only).
    double sigma_w2_limit() const;
    bool certifies(double sigma_w2) const { return sigma_w2 < sigma_w2_limit(); }
};

ConvergenceBounds convergence_bounds(const Activation& act, const std::vector<double>& x_grid, double delta,
                                     const Numerics& num = {});

} // namespace sigprop
