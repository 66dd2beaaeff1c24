#pragma once

#include "sigprop/eoc.hpp"

#include <iosfwd>
#include <vector>

namespace sigprop {

// one_minus_c is tracked on its own once c gets close to 1, so it keeps full
// relative precision.
struct Trajectory {
    std::vector<long> layer; // 1-based
    std::vector<double> qa, qb, c, one_minus_c;
    bool diverged = false;

    std::size_t size() const { return c.size(); }
    void push(long l, double qa_l, double qb_l, double c_l, double u_l);
};

// Full kernel recursion for two inputs with first-layer variances q1a, q1b and
// correlation c1.
Trajectory propagate(double q1a, double q1b, double c1, int depth, const NetParams& p, const Activation& act,
                     const Numerics& num = {});

// c <- f(c) at the EOC limiting variance. The variance columns hold q, or
// q_in on the weak EOC where any input variance is preserved.
Trajectory propagate_eoc(double c1, int depth, const EocPoint& eoc, const Activation& act, const Numerics& num = {},
                         double q_in = 1.0);

// Residual ReLU network with sigma_b = 0:
//   q <- (1 + w/2) q,   c <- c + d (w/2) (f(c) - c),   d = 1 / (1 + w/2),  w = sigma_w_bar^2
// where f is the ReLU correlation map at the EOC.
Trajectory propagate_residual(double c1, int depth, double sigma_w_bar);

enum class DecayKind { exponential, power };

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

struct DecayFit {
    DecayKind kind = DecayKind::power;
    double slope = 0.0;    // power exponent or exponential rate per layer
    double constant = 0.0; // prefactor: 1 - c ~ constant * l^slope or constant * exp(slope l)
    long first = 0, last = 0; // layer window, inclusive
    double r2 = 0.0;
    LineFit power;       // log(1 - c) against log l
    LineFit exponential; // log(1 - c) against l
};

// Least squares over the rows with layer in [first, last].
DecayFit fit_decay(const Trajectory& t, long first, long last);
// Default window: drops the first 10% of layers.
DecayFit fit_decay(const Trajectory& t);

// Columns layer,q_a,q_b,c,one_minus_c; every = k keeps layers 1, 1+k, ... and the last.
void write_trajectory_csv(std::ostream& os, const Trajectory& t, int every = 1);
// Reads the same schema; '#' lines are skipped.
Trajectory read_trajectory_csv(std::istream& is);

} // namespace sigprop
