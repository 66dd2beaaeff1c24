#pragma once

// Arc-cosine kernel pieces for piecewise-linear activations.

#include <cmath>
#include <numbers>

namespace sigprop::relu_kernel {

// acos(x), accurate near x = 1.
inline double theta(double x) {
    if (x > 0.5) return 2.0 * std::asin(std::sqrt(0.5 * (1.0 - x)));
    return std::acos(x);
}

// acos(1 - u) for a small gap u = 1 - x known exactly.
inline double theta_from_gap(double u) { return 2.0 * std::asin(std::sqrt(0.5 * u)); }

// (sin t - t cos t) / (2 pi); for small t the series
// sum_k (-1)^{k+1} 2k t^{2k+1} / (2k+1)! avoids cancellation.
inline double dfun(double t) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    if (t > 0.1) return (std::sin(t) - t * std::cos(t)) / two_pi;
    const double t2 = t * t;
    double term = t * t2 / 6.0; // t^3 / 3!
    double sum = 0.0;
    for (int k = 1; k <= 8; ++k) {
        sum += (k % 2 == 1 ? 1.0 : -1.0) * 2.0 * k * term;
        term *= t2 / ((2.0 * k + 2.0) * (2.0 * k + 3.0));
    }
    return sum / two_pi;
}

} // namespace sigprop::relu_kernel
