#pragma once

// Gaussian expectations by Gauss quadrature.
//
//   expect1(g, x)            = E[g(sqrt(x) Z)]
//   expect2(g, h, qa, qb, c) = E[g(sqrt(qa) Z1) h(sqrt(qb) (c Z1 + sqrt(1 - c^2) Z2))]
//
// Activations put their sharp features (kinks, or steep saturation when the
// variance is large) at the origin. In 1-D the axis is split at 0 and each
// half gets a half-range Hermite rule, whose nodes crowd toward 0. In 2-D the
// plane is integrated in polar coordinates with arcs cut at the lines Z1 = 0
// and U2 = 0, so both factors are smooth on every cell. Plain Gauss-Hermite
// loses digits once sqrt(x) * |node spacing| exceeds the feature width.

#include "sigprop/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

namespace sigprop::gauss {

inline constexpr int kDefaultOrder = 128;
inline constexpr int kMaxOrder = 320;
inline constexpr double kCorrelationSlack = 1e-12;

// Weights are normalized so that they sum to the total mass of the measure (1
// for the probability measures used here).
struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;

    std::size_t size() const { return nodes.size(); }

    template <class F>
    double apply(F&& f) const {
        double s = 0.0;
        for (std::size_t i = 0; i < nodes.size(); ++i) s += weights[i] * f(nodes[i]);
        return s;
    }
};

// Gauss rule from three-term recurrence coefficients of the monic orthogonal
// polynomials: p_{k+1} = (x - a_k) p_k - b_k p_{k-1}. Needs a[0..n-1] and
// b[0..n] where b[0] is the total mass.
QuadratureRule rule_from_recurrence(const std::vector<double>& a, const std::vector<double>& b, int n);

QuadratureRule hermite_rule(int n);       // N(0, 1)
QuadratureRule half_hermite_rule(int n);  // half-normal on [0, inf)
QuadratureRule split_hermite_rule(int n); // N(0, 1) as two mirrored half-normal rules, 2n nodes
QuadratureRule legendre_rule(int n);      // uniform probability on [-1, 1]

// Clamps round-off excursions of a correlation; throws DomainError beyond the slack.
double clamp_correlation(double c);

[[noreturn]] void throw_non_finite(double node, double value);

class Engine {
public:
    explicit Engine(int order = kDefaultOrder);

    // Shared immutable engine per order.
    static const Engine& at(int order);

    int order() const { return order_; }
    const QuadratureRule& hermite() const { return hermite_; }
    const QuadratureRule& split() const { return split_; }
    const QuadratureRule& half() const { return half_; }
    const QuadratureRule& angular() const { return angular_; }

    template <class G>
    double expect1(G&& g, double x) const;

    template <class G, class H>
    double expect2(G&& g, H&& h, double qa, double qb, double c) const;

private:
    template <class G, class H>
    double polar(G& g, H& h, double sa, double sb, double c) const;

    int order_;
    QuadratureRule hermite_;
    QuadratureRule split_;
    QuadratureRule half_;
    QuadratureRule angular_;
};

template <class G>
double Engine::expect1(G&& g, double x) const {
    if (!(x >= 0.0)) throw DomainError("expect1: variance must be >= 0");
    if (x == 0.0) {
        double v = g(0.0);
        if (!std::isfinite(v)) throw_non_finite(0.0, v);
        return v;
    }
    const double s = std::sqrt(x);
    const QuadratureRule& r = split_;
    double acc = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double z = s * r.nodes[i];
        const double v = g(z);
        if (!std::isfinite(v)) throw_non_finite(z, v);
        acc += r.weights[i] * v;
    }
    return acc;
}

template <class G, class H>
double Engine::expect2(G&& g, H&& h, double qa, double qb, double c) const {
    if (!(qa >= 0.0) || !(qb >= 0.0)) throw DomainError("expect2: variances must be >= 0");
    c = clamp_correlation(c);
    const double sa = std::sqrt(qa), sb = std::sqrt(qb);
    if (std::abs(c) == 1.0 || qa == 0.0 || qb == 0.0) {
        // Degenerate: one Gaussian direction suffices. With qa = 0 the first
        // factor is the constant g(0), and symmetrically for qb.
        if (qa == 0.0 || qb == 0.0) {
            const double ga = g(0.0), hb = h(0.0);
            if (!std::isfinite(ga)) throw_non_finite(0.0, ga);
            if (!std::isfinite(hb)) throw_non_finite(0.0, hb);
            if (qa == 0.0 && qb == 0.0) return ga * hb;
            if (qa == 0.0) return ga * expect1(h, qb);
            return hb * expect1(g, qa);
        }
        return expect1([&](double z) { return g(z) * h(c * sb / sa * z); }, qa);
    }
    return polar(g, h, sa, sb, c);
}

// (Z1, Z2) = r (cos t, sin t); U2 = r cos(t - t0) with t0 = acos(c). The
// integrand is smooth on each arc between the lines Z1 = 0 and U2 = 0.
template <class G, class H>
double Engine::polar(G& g, H& h, double sa, double sb, double c) const {
    constexpr double pi = std::numbers::pi;
    const double t0 = std::acos(c);
    const double s = std::sin(t0);
    double cuts[6] = {0.0, 0.5 * pi, 1.5 * pi, std::fmod(t0 + 0.5 * pi, 2 * pi), t0 + 1.5 * pi, 2 * pi};
    if (cuts[4] >= 2 * pi) cuts[4] -= 2 * pi;
    std::sort(cuts, cuts + 6);

    const QuadratureRule& ang = angular_;
    const QuadratureRule& rad = half_;
    double acc = 0.0;
    for (int k = 0; k + 1 < 6; ++k) {
        const double lo = cuts[k], hi = cuts[k + 1];
        if (hi - lo < 1e-15) continue;
        const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
        double arc = 0.0;
        for (std::size_t m = 0; m < ang.size(); ++m) {
            const double t = mid + half * ang.nodes[m];
            const double ct = std::cos(t), st = std::sin(t);
            const double ca = ct, cb = c * ct + s * st;
            double radial = 0.0;
            for (std::size_t j = 0; j < rad.size(); ++j) {
                const double r = rad.nodes[j];
                const double x = sa * r * ca, y = sb * r * cb;
                const double v = g(x) * h(y);
                if (!std::isfinite(v)) throw_non_finite(std::isfinite(g(x)) ? y : x, v);
                radial += rad.weights[j] * r * v;
            }
            arc += ang.weights[m] * radial;
        }
        acc += (hi - lo) * arc;
    }
    // dA = r dr dt; half-normal density sqrt(2/pi) e^{-r^2/2} absorbs the
    // radial Gaussian, leaving (1 / 2 pi) * sqrt(pi / 2).
    return acc * std::sqrt(0.5 * pi) / (2 * pi);
}

} // namespace sigprop::gauss
