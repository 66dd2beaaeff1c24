#pragma once

namespace sigprop {

// Knobs shared by every iterative or quadrature-based routine.
struct Numerics {
    int quad_order = 128;
    double tol = 1e-13;     // on |dq|, relative once q > 1
    long max_iter = 100000;
    double diverge_at = 1e12;

    Numerics doubled() const {
        Numerics n = *this;
        n.quad_order *= 2;
        return n;
    }
};

} // namespace sigprop
