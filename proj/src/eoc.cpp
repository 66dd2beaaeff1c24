#include "sigprop/eoc.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace sigprop {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

const gauss::Engine& engine(const Numerics& num) { return gauss::Engine::at(num.quad_order); }

void require_smooth(const Activation& act, const char* what) {
    if (act.is_relu_like())
        throw UnsupportedError(fmt::format("{}: undefined for piecewise-linear activation {}", what, act.spec()));
}

} // namespace

EocPoint weak_eoc(double lambda, double beta) {
    if (lambda == 0.0 && beta == 0.0) throw DomainError("weak_eoc: (lambda, beta) = (0, 0)");
    EocPoint e;
    e.sigma_b = 0.0;
    e.params = {0.0, 2.0 / (lambda * lambda + beta * beta)};
    e.sigma_w = std::sqrt(e.params.sigma_w2);
    e.weak = true;
    return e;
}

EocPoint eoc_point(double sigma_b, const Activation& act, const Numerics& num) {
    if (!std::isfinite(sigma_b) || sigma_b < 0.0) throw DomainError("sigma_b must be finite and >= 0");
    if (auto s = act.relu_slopes()) {
        if (sigma_b != 0.0)
            throw NoEocError(fmt::format("{} has only the weak EOC point at sigma_b = 0", act.spec()), 0.0);
        return weak_eoc(s->lambda, s->beta);
    }

    const double sb2 = sigma_b * sigma_b;
    double q = 0.0;
    bool converged = false;
    long it = 0;
    std::deque<double> trace;
    while (it < num.max_iter) {
        ++it;
        const double next = sb2 + variance_ratio(q, act, num);
        const double step = next - q;
        q = next;
        trace.push_back(q);
        if (trace.size() > 32) trace.pop_front();
        if (!std::isfinite(q) || q > num.diverge_at) break;
        if (std::abs(step) <= num.tol * std::max(1.0, q)) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        const SigmaMax sm = sigma_max(act, 100.0, num);
        if (!sm.unbounded && sigma_b >= sm.value)
            throw NoEocError(fmt::format("no EOC at sigma_b = {}: sigma_max ~= {}", sigma_b, sm.value), sm.value);
        throw NonConvergenceError(fmt::format("EOC iteration did not converge at sigma_b = {} after {} steps",
                                              sigma_b, it),
                                  std::vector<double>(trace.begin(), trace.end()));
    }

    // The update contracts slowly when e'(q) is near 1, so a small final step
    // can still leave q well off the root; a few secant steps on
    // g(x) = sb2 + e(x) - x from the last two iterates remove that bias.
    if (q > 0.0 && trace.size() >= 2) {
        auto g = [&](double x) { return sb2 + variance_ratio(x, act, num) - x; };
        double x0 = trace[trace.size() - 2], x1 = q;
        double g0 = g(x0), g1 = g(x1);
        for (int k = 0; k < 6 && g1 != 0.0 && g1 != g0; ++k) {
            const double x2 = x1 - g1 * (x1 - x0) / (g1 - g0);
            if (!(x2 > 0.0) || std::abs(x2 - x1) > 1e3 * num.tol * std::max(1.0, q)) break;
            const double g2 = g(x2);
            if (!(std::abs(g2) < std::abs(g1))) break;
            x0 = x1;
            g0 = g1;
            x1 = x2;
            g1 = g2;
        }
        q = x1;
    }

    const gauss::Engine& eng = engine(num);
    const double d1sq = moment(act, Deriv::d1, Deriv::d1, q, eng);
    if (!(d1sq > 0.0)) throw NoEocError(fmt::format("E[phi'^2] vanishes at q = {}", q));

    EocPoint e;
    e.sigma_b = sigma_b;
    e.params = {sb2, 1.0 / d1sq};
    e.sigma_w = std::sqrt(e.params.sigma_w2);
    e.q = q;
    e.iterations = it;

    const double a = alpha_coef(q, e.params, act, num);
    if (a > 1.0 + 1e-9)
        throw NoEocError(fmt::format("no valid EOC at sigma_b = {}: F'(q) = {} > 1 (trivial-EOC regime)", sigma_b, a));

    // q must be the smallest fixed point of F with this sigma_w.
    const double floor_tol = 1e-10 * std::max(1.0, q);
    for (int i = 0; i < 512 && q > 0.0; ++i) {
        const double x = q * i / 512.0;
        if (variance_map(x, e.params, act, num) - x < -floor_tol)
            throw NoEocError(fmt::format("no valid EOC at sigma_b = {}: F has a fixed point below q = {} (near {})",
                                         sigma_b, q, x));
    }

    e.residual = std::abs(variance_map(q, e.params, act, num) - q);
    if (q == 0.0) {
        e.beta_q = kInf;
    } else if (act.class_a()) {
        try {
            e.beta_q = beta_q(q, act, num);
        } catch (const UnsupportedError&) {
            e.beta_q.reset();
        }
    }
    return e;
}

SigmaMax sigma_max(const Activation& act, double x_hi, const Numerics& num) {
    require_smooth(act, "sigma_max");
    if (!(x_hi > 1e-6)) throw DomainError("sigma_max: x_hi must exceed 1e-6");
    auto obj = [&](double x) { return std::abs(x - variance_ratio(x, act, num)); };

    constexpr int n = 2048;
    const double lo = 1e-6;
    const double ratio = std::pow(x_hi / lo, 1.0 / n);
    std::vector<double> xs(n), vs(n);
    for (int i = 0; i < n; ++i) {
        xs[i] = i + 1 == n ? x_hi : lo * std::pow(ratio, i + 1);
        vs[i] = obj(xs[i]);
    }
    const int k = int(std::max_element(vs.begin(), vs.end()) - vs.begin());
    SigmaMax r;
    r.x_hi = x_hi;
    double best = vs[k], arg = xs[k];
    if (k > 0 && k + 1 < n) {
        // golden-section refinement inside the neighbouring cells
        double a = xs[k - 1], b = xs[k + 1];
        const double g = 0.5 * (std::sqrt(5.0) - 1.0);
        double c = b - g * (b - a), d = a + g * (b - a);
        double fc = obj(c), fd = obj(d);
        for (int it = 0; it < 80 && b - a > 1e-12 * b; ++it) {
            if (fc > fd) {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = obj(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = obj(d);
            }
        }
        const double m = 0.5 * (a + b), fm = obj(m);
        if (fm > best) {
            best = fm;
            arg = m;
        }
    }
    r.value = std::sqrt(best);
    r.argmax = arg;
    r.unbounded = act.tanh_like() && vs[n - 1] > vs[n - 2];
    return r;
}

double beta_q(double q, const Activation& act, const Numerics& num) {
    if (!(q > 0.0)) throw DomainError("beta_q: q must be > 0");
    if (!act.class_a() || act.phi2_distributional())
        throw UnsupportedError(fmt::format("beta_q: {} is not in class A", act.spec()));
    const gauss::Engine& eng = engine(num);
    const double den = moment(act, Deriv::d2, Deriv::d2, q, eng);
    if (!(den > 0.0)) throw UnsupportedError(fmt::format("beta_q undefined for {}: phi'' vanishes", act.spec()));
    return 2.0 * moment(act, Deriv::d1, Deriv::d1, q, eng) / (q * den);
}

SigmaBChoice choose_sigma_b(double depth, const Activation& act, const Numerics& num) {
    if (!(depth >= 1.0) || !std::isfinite(depth)) throw DomainError("choose_sigma_b: depth must be >= 1");
    if (!act.class_a() || act.phi2_distributional())
        throw UnsupportedError(fmt::format("choose_sigma_b: {} is not in class A", act.spec()));

    SigmaBChoice out;
    auto beta_at = [&](double sb) -> std::optional<double> {
        try {
            const EocPoint e = eoc_point(sb, act, num);
            if (e.beta_q && std::isfinite(*e.beta_q)) return *e.beta_q;
        } catch (const Error&) {
        }
        return std::nullopt;
    };

    const double scan[] = {0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0};
    for (double sb : scan)
        if (auto b = beta_at(sb)) out.table.emplace_back(sb, *b);

    for (std::size_t i = 1; i < out.table.size(); ++i)
        if (!(out.table[i].second < out.table[i - 1].second))
            throw BracketError("choose_sigma_b: beta_q is not decreasing in sigma_b on the scan", out.table);

    std::optional<std::size_t> lo_idx;
    for (std::size_t i = 0; i + 1 < out.table.size(); ++i) {
        // consecutive scan points only; a gap means the EOC curve broke
        if (out.table[i].second >= depth && out.table[i + 1].second <= depth) {
            lo_idx = i;
            break;
        }
    }
    if (!lo_idx) throw BracketError(fmt::format("choose_sigma_b: beta_q = {} not bracketed", depth), out.table);

    double lo = out.table[*lo_idx].first, hi = out.table[*lo_idx + 1].first;
    double sb = 0.5 * (lo + hi);
    // Stops at |beta_q - depth| <= 0.5 or a sigma_b bracket below 1e-5.
    for (int it = 0; it < 200; ++it) {
        sb = 0.5 * (lo + hi);
        const auto b = beta_at(sb);
        if (!b) throw BracketError(fmt::format("choose_sigma_b: EOC failed at sigma_b = {}", sb), out.table);
        if (std::abs(*b - depth) <= 0.5 || hi - lo < 1e-5) break;
        if (*b > depth)
            lo = sb;
        else
            hi = sb;
    }
    out.sigma_b = sb;
    out.point = eoc_point(sb, act, num);
    return out;
}

long max_depth(double beta, double c, double eps) {
    if (!(beta > 0.0)) throw DomainError("max_depth: beta_q must be > 0");
    if (!(c >= 0.0 && c < 1.0)) throw DomainError("max_depth: c must be in [0, 1)");
    if (!(eps > 0.0 && eps < 1.0 - c)) throw DomainError("max_depth: eps must be in (0, 1 - c)");
    return static_cast<long>(std::floor(beta * (1.0 - c - eps)));
}

double eoc_seminorm(const Activation& act, const std::vector<double>& y_grid, const Numerics& num) {
    if (!act.class_a() || act.phi2_distributional())
        throw UnsupportedError(fmt::format("eoc_seminorm: {} is not in class A", act.spec()));
    const gauss::Engine& eng = engine(num);
    double sup = 0.0;
    for (double y : y_grid) {
        if (!(y >= 0.0)) throw DomainError("eoc_seminorm: grid values must be >= 0");
        if (y == 0.0) continue;
        const double v = y * moment(act, Deriv::d2, Deriv::d2, y, eng) / moment(act, Deriv::d1, Deriv::d1, y, eng);
        sup = std::max(sup, v);
    }
    return sup;
}

namespace {

void sup_gap(const CorrelationMap& f, int grid, GapReport& r) {
    if (grid < 2) throw DomainError("gap grid needs at least 2 points");
    for (int i = 0; i < grid; ++i) {
        const double x = double(i) / (grid - 1);
        const double g = std::abs(f(x) - x);
        if (g > r.sup_gap) {
            r.sup_gap = g;
            r.argmax = x;
        }
    }
}

} // namespace

GapReport check_prop4(const Activation& act, double sigma_b, const Numerics& num, int grid) {
    const EocPoint e = eoc_point(sigma_b, act, num);
    if (!e.q || !e.beta_q) throw UnsupportedError("check_prop4: beta_q undefined for this activation");
    GapReport r;
    r.sigma_b = sigma_b;
    r.beta_q = *e.beta_q;
    r.bound = 1.0 / r.beta_q;
    sup_gap(CorrelationMap(*e.q, e.params, act, num), grid, r);
    r.holds = r.sup_gap <= r.bound + 1e-9;
    return r;
}

GapReport check_seminorm_bound(const Activation& act, double sigma_b, std::vector<double> y_grid,
                               const Numerics& num, int grid) {
    const EocPoint e = eoc_point(sigma_b, act, num);
    if (!e.q) throw UnsupportedError("check_seminorm_bound: no limiting variance");
    y_grid.push_back(*e.q);
    GapReport r;
    r.sigma_b = sigma_b;
    r.beta_q = e.beta_q.value_or(kInf);
    r.bound = 0.5 * eoc_seminorm(act, y_grid, num);
    sup_gap(CorrelationMap(*e.q, e.params, act, num), grid, r);
    r.holds = r.sup_gap <= r.bound + 1e-9;
    return r;
}

std::optional<double> trivial_eoc_boundary(const Activation& act, double v_hi, const Numerics& num) {
    require_smooth(act, "trivial_eoc_boundary");
    const gauss::Engine& eng = engine(num);
    auto m = [&](double v) { return moment(act, Deriv::d2, Deriv::d0, v, eng); };
    constexpr int n = 400;
    const double lo = 1e-4;
    const double ratio = std::pow(v_hi / lo, 1.0 / (n - 1));
    double prev_v = lo, prev = m(lo);
    for (int i = 1; i < n; ++i) {
        const double v = lo * std::pow(ratio, i);
        const double cur = m(v);
        if ((prev > 0.0) != (cur > 0.0)) {
            double a = prev_v, b = v;
            const bool pos_a = prev > 0.0;
            for (int it = 0; it < 100 && b - a > 1e-14 * b; ++it) {
                const double mid = 0.5 * (a + b);
                if ((m(mid) > 0.0) == pos_a)
                    a = mid;
                else
                    b = mid;
            }
            return 0.5 * (a + b);
        }
        prev_v = v;
        prev = cur;
    }
    return std::nullopt;
}

} // namespace sigprop
