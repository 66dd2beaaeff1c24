#include "sigprop/dynamics.hpp"

#include "relu_kernel.hpp"
#include "sigprop/csv.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

namespace sigprop {

namespace {

// Below this, c is carried through its own update; above it, u = 1 - c is.
constexpr double kSwitch = 0.999;

void check_inputs(double c1, int depth) {
    if (depth < 1) throw DomainError("depth must be >= 1");
    if (!(std::abs(c1) <= 1.0)) throw DomainError(fmt::format("c1 = {} outside [-1, 1]", c1));
}

// E[phi(sqrt(qa) Z1) phi(sqrt(qb) U2(c))] and E(1) - E(c), where c = 1 - u.
struct CrossMoment {
    const Activation& act;
    const gauss::Engine& eng;

    double at(double qa, double qb, double c) const {
        if (auto s = act.relu_slopes()) {
            const double d = s->lambda - s->beta;
            const double k = 0.5 * (s->lambda * s->lambda + s->beta * s->beta);
            return std::sqrt(qa * qb) * (d * d * relu_kernel::dfun(relu_kernel::theta(c)) + k * c);
        }
        return moment2(act, Deriv::d0, Deriv::d0, qa, qb, c, eng);
    }

    double drop(double qa, double qb, double u) const {
        if (auto s = act.relu_slopes()) {
            const double d = s->lambda - s->beta;
            const double k = 0.5 * (s->lambda * s->lambda + s->beta * s->beta);
            return std::sqrt(qa * qb) * (k * u - d * d * relu_kernel::dfun(relu_kernel::theta_from_gap(u)));
        }
        return at(qa, qb, 1.0) - at(qa, qb, 1.0 - u);
    }
};

} // namespace

void Trajectory::push(long l, double qa_l, double qb_l, double c_l, double u_l) {
    layer.push_back(l);
    qa.push_back(qa_l);
    qb.push_back(qb_l);
    c.push_back(c_l);
    one_minus_c.push_back(u_l);
}

Trajectory propagate(double q1a, double q1b, double c1, int depth, const NetParams& p, const Activation& act,
                     const Numerics& num) {
    p.validate();
    check_inputs(c1, depth);
    if (!(q1a >= 0.0) || !(q1b >= 0.0)) throw DomainError("input variances must be >= 0");
    const CrossMoment cross{act, gauss::Engine::at(num.quad_order)};

    Trajectory t;
    double qa = q1a, qb = q1b, c = c1, u = 1.0 - c1;
    t.push(1, qa, qb, c, u);
    for (long l = 2; l <= depth; ++l) {
        const double na = variance_map(qa, p, act, num);
        const double nb = variance_map(qb, p, act, num);
        if (!std::isfinite(na) || !std::isfinite(nb) || na > num.diverge_at || nb > num.diverge_at) {
            t.diverged = true;
            break;
        }
        const double den = std::sqrt(na * nb);
        if (den > 0.0) {
            if (c > kSwitch) {
                // den - sb2 - sw2 E(1) is the Cauchy-Schwarz slack, exactly 0 when qa = qb.
                const double slack = qa == qb ? 0.0 : den - p.sigma_b2 - p.sigma_w2 * cross.at(qa, qb, 1.0);
                u = (slack + p.sigma_w2 * cross.drop(qa, qb, u)) / den;
                c = 1.0 - u;
            } else {
                c = gauss::clamp_correlation((p.sigma_b2 + p.sigma_w2 * cross.at(qa, qb, c)) / den);
                u = 1.0 - c;
            }
        }
        qa = na;
        qb = nb;
        t.push(l, qa, qb, c, u);
    }
    return t;
}

Trajectory propagate_eoc(double c1, int depth, const EocPoint& eoc, const Activation& act, const Numerics& num,
                         double q_in) {
    check_inputs(c1, depth);
    const double q = eoc.q.value_or(q_in);
    const CorrelationMap f(eoc.weak ? q_in : q, eoc.params, act, num);
    Trajectory t;
    double c = c1, u = 1.0 - c1;
    t.push(1, q, q, c, u);
    for (long l = 2; l <= depth; ++l) {
        if (c > kSwitch) {
            u -= f.gap(u);
            c = 1.0 - u;
        } else {
            c = gauss::clamp_correlation(f(c));
            u = 1.0 - c;
        }
        t.push(l, q, q, c, u);
    }
    return t;
}

Trajectory propagate_residual(double c1, int depth, double sigma_w_bar) {
    check_inputs(c1, depth);
    if (!(sigma_w_bar > 0.0) || !std::isfinite(sigma_w_bar)) throw DomainError("sigma_w_bar must be > 0");
    const double h = 0.5 * sigma_w_bar * sigma_w_bar;
    const double step = h / (1.0 + h); // delta * sigma_w_bar^2 / 2

    Trajectory t;
    double q = 1.0, c = c1, u = 1.0 - c1;
    t.push(1, q, q, c, u);
    for (long l = 2; l <= depth; ++l) {
        q *= 1.0 + h;
        if (c > kSwitch) {
            // f(c) - c = 2 D(theta) for the ReLU map at the EOC
            u -= step * 2.0 * relu_kernel::dfun(relu_kernel::theta_from_gap(u));
            c = 1.0 - u;
        } else {
            const double gap = (std::sqrt((1.0 - c) * (1.0 + c)) - c * std::acos(c)) / std::numbers::pi;
            c = std::min(1.0, c + step * gap);
            u = 1.0 - c;
        }
        t.push(l, q, q, c, u);
    }
    return t;
}

namespace {

LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = double(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (f.intercept + f.slope * x[i]);
        ss_res += r * r;
    }
    f.r2 = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
    return f;
}

} // namespace

DecayFit fit_decay(const Trajectory& t, long first, long last) {
    if (first < 1 || last < first) throw DomainError(fmt::format("bad fit window [{}, {}]", first, last));
    std::vector<double> l, loglv, logu;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const long li = t.layer[i];
        if (li < first || li > last) continue;
        const double u = t.one_minus_c[i];
        if (!(u > 0.0) || !std::isfinite(u))
            throw DomainError(fmt::format("1 - c is not positive at layer {} (underflow or saturation)", li));
        l.push_back(double(li));
        loglv.push_back(std::log(double(li)));
        logu.push_back(std::log(u));
    }
    if (l.size() < 10)
        throw DomainError(fmt::format("fit window [{}, {}] holds {} points, need >= 10", first, last, l.size()));
    DecayFit f;
    f.first = first;
    f.last = last;
    f.power = least_squares(loglv, logu);
    f.exponential = least_squares(l, logu);
    const LineFit& best = f.power.r2 >= f.exponential.r2 ? f.power : f.exponential;
    f.kind = f.power.r2 >= f.exponential.r2 ? DecayKind::power : DecayKind::exponential;
    f.slope = best.slope;
    f.constant = std::exp(best.intercept);
    f.r2 = best.r2;
    return f;
}

DecayFit fit_decay(const Trajectory& t) {
    if (t.size() == 0) throw DomainError("empty trajectory");
    const long last = t.layer.back();
    const long first = t.layer.front() + static_cast<long>(0.1 * double(last - t.layer.front() + 1));
    return fit_decay(t, first, last);
}

void write_trajectory_csv(std::ostream& os, const Trajectory& t, int every) {
    if (every < 1) throw DomainError("every must be >= 1");
    os << "layer,q_a,q_b,c,one_minus_c\n";
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (i % every != 0 && i + 1 != t.size()) continue;
        os << t.layer[i] << ',' << csv::num(t.qa[i]) << ',' << csv::num(t.qb[i]) << ',' << csv::num(t.c[i]) << ','
           << csv::num(t.one_minus_c[i]) << '\n';
    }
}

Trajectory read_trajectory_csv(std::istream& is) {
    Trajectory t;
    std::string line;
    bool header = false;
    long lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            if (line != "layer,q_a,q_b,c,one_minus_c")
                throw DomainError(fmt::format("line {}: expected trajectory header, got '{}'", lineno, line));
            header = true;
            continue;
        }
        const auto f = csv::split(line);
        if (f.size() != 5) throw DomainError(fmt::format("line {}: expected 5 fields", lineno));
        const double layer = csv::parse_double(f[0]);
        if (layer < 1 || layer != std::floor(layer)) throw DomainError(fmt::format("line {}: bad layer", lineno));
        if (!t.layer.empty() && long(layer) <= t.layer.back())
            throw DomainError(fmt::format("line {}: layers must increase", lineno));
        t.push(long(layer), csv::parse_double(f[1]), csv::parse_double(f[2]), csv::parse_double(f[3]),
               csv::parse_double(f[4]));
    }
    if (!header) throw DomainError("trajectory CSV has no header");
    return t;
}

} // namespace sigprop
