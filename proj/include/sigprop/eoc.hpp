#pragma once

#include "sigprop/meanfield.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace sigprop {

struct EocPoint {
    double sigma_b = 0.0;
    double sigma_w = 0.0;
    // Empty on the weak EOC: the variance is preserved layer to layer
    // instead of converging.
    std::optional<double> q;
    // Empty when undefined (piecewise-linear activations); +inf when q = 0.
    std::optional<double> beta_q;
    bool weak = false;
    NetParams params; // exact (sigma_b^2, sigma_w^2) pair
    long iterations = 0;
    double residual = 0.0; // |F(q) - q|
};

// q <- sigma_b^2 + e(q) from q = 0, then sigma_w^2 = 1 / E[phi'(sqrt(q) Z)^2].
EocPoint eoc_point(double sigma_b, const Activation& act, const Numerics& num = {});

EocPoint weak_eoc(double lambda, double beta);

struct SigmaMax {
    double value = 0.0;  // sqrt of the grid supremum of |x - e(x)|
    double argmax = 0.0;
    double x_hi = 0.0;
    bool unbounded = false; // still increasing at x_hi for a Tanh-like activation
};

SigmaMax sigma_max(const Activation& act, double x_hi = 100.0, const Numerics& num = {});

double beta_q(double q, const Activation& act, const Numerics& num = {});

struct SigmaBChoice {
    double sigma_b = 0.0;
    EocPoint point;
    std::vector<std::pair<double, double>> table; // scanned (sigma_b, beta_q)
};

// Solves beta_q(sigma_b) = depth by bisection.
SigmaBChoice choose_sigma_b(double depth, const Activation& act, const Numerics& num = {});

long max_depth(double beta_q, double c, double eps);

// Grid supremum of y E[phi''(sqrt(y) Z)^2] / E[phi'(sqrt(y) Z)^2].
double eoc_seminorm(const Activation& act, const std::vector<double>& y_grid, const Numerics& num = {});

struct GapReport {
    double sigma_b = 0.0;
    double sup_gap = 0.0; // sup over the grid of |f(x) - x|, x in [0, 1]
    double argmax = 0.0;
    double bound = 0.0;
    double beta_q = 0.0;
    bool holds = false;
};

// sup |f(x) - x| <= 1 / beta_q on an evenly spaced grid of [0, 1].
GapReport check_prop4(const Activation& act, double sigma_b, const Numerics& num = {}, int grid = 2001);

// sup |f(x) - x| <= |phi|_EOC / 2, the semi-norm taken over y_grid with the
// EOC variance q appended.
GapReport check_seminorm_bound(const Activation& act, double sigma_b, std::vector<double> y_grid,
                               const Numerics& num = {}, int grid = 2001);

// First variance where E[phi''(sqrt(v) Z) phi(sqrt(v) Z)] changes sign, if
// any on (0, v_hi]. While that moment is positive, an EOC candidate has
// F'(q) > 1, so small sigma_b leaves only the trivial point (0, 1/|phi'(0)|).
std::optional<double> trivial_eoc_boundary(const Activation& act, double v_hi = 25.0, const Numerics& num = {});

} // namespace sigprop
