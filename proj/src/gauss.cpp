#include "sigprop/gauss.hpp"

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include <map>
#include <memory>
#include <mutex>

namespace sigprop::gauss {

namespace {

void check_order(int n) {
    if (n < 1 || n > kMaxOrder)
        throw DomainError(fmt::format("quadrature order must be in [1, {}], got {}", kMaxOrder, n));
}

// Orthonormal polynomial values p_0..p_{n} at x (p_0 = 1/sqrt(mass)) and the
// derivative of p_n.
struct PolyEval {
    double pn, dpn, sumsq; // sumsq = sum_{k<n} p_k^2
};

PolyEval eval_orthonormal(const std::vector<double>& a, const std::vector<double>& b, int n, double x) {
    double p_prev = 0.0, p = 1.0 / std::sqrt(b[0]);
    double d_prev = 0.0, d = 0.0;
    double sumsq = p * p;
    for (int k = 0; k < n; ++k) {
        const double sb1 = std::sqrt(b[k + 1]);
        const double sbk = k > 0 ? std::sqrt(b[k]) : 0.0;
        const double p_next = ((x - a[k]) * p - sbk * p_prev) / sb1;
        const double d_next = (p + (x - a[k]) * d - sbk * d_prev) / sb1;
        p_prev = p;
        p = p_next;
        d_prev = d;
        d = d_next;
        if (k + 1 < n) sumsq += p * p;
    }
    return {p, d, sumsq};
}

// Monic recurrence of the half-normal density sqrt(2/pi) exp(-x^2/2) on
// [0, inf), by Lanczos with full reorthogonalization on a fine discretization.
void half_normal_recurrence(int n, std::vector<double>& a, std::vector<double>& b) {
    constexpr double x_max = 48.0;
    constexpr int panels = 240;
    const QuadratureRule gl = legendre_rule(20);
    const std::size_t m = panels * gl.size();
    Eigen::VectorXd x(m), sw(m);
    const double width = x_max / panels;
    const double c0 = std::sqrt(2.0 / std::numbers::pi);
    std::size_t idx = 0;
    for (int p = 0; p < panels; ++p) {
        const double mid = (p + 0.5) * width;
        for (std::size_t i = 0; i < gl.size(); ++i, ++idx) {
            const double t = mid + 0.5 * width * gl.nodes[i];
            x[idx] = t;
            // legendre weights are a probability on [-1, 1]; panel length = width
            sw[idx] = std::sqrt(width * gl.weights[i] * c0 * std::exp(-0.5 * t * t));
        }
    }
    a.assign(n + 1, 0.0);
    b.assign(n + 1, 0.0);
    const double mass = sw.squaredNorm();
    b[0] = mass;
    std::vector<Eigen::VectorXd> q;
    q.reserve(n + 1);
    q.push_back(sw / std::sqrt(mass));
    for (int k = 0; k <= n; ++k) {
        Eigen::VectorXd v = x.cwiseProduct(q[k]);
        a[k] = q[k].dot(v);
        if (k == n) break;
        for (int pass = 0; pass < 2; ++pass)
            for (int j = 0; j <= k; ++j) v -= q[j].dot(v) * q[j];
        const double nrm = v.norm();
        b[k + 1] = nrm * nrm;
        q.push_back(v / nrm);
    }
}

} // namespace

QuadratureRule rule_from_recurrence(const std::vector<double>& a, const std::vector<double>& b, int n) {
    check_order(n);
    if (a.size() < std::size_t(n) || b.size() < std::size_t(n) + 1)
        throw DomainError(fmt::format("recurrence needs {} a and {} b coefficients", n, n + 1));
    for (int k = 0; k <= n; ++k)
        if (!(b[k] > 0.0)) throw DomainError("recurrence b coefficients must be positive");
    Eigen::VectorXd diag(n), sub(n > 1 ? n - 1 : 1);
    for (int k = 0; k < n; ++k) diag[k] = a[k];
    for (int k = 1; k < n; ++k) sub[k - 1] = std::sqrt(b[k]);
    QuadratureRule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    if (n == 1) {
        r.nodes[0] = a[0];
        r.weights[0] = b[0];
        return r;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    const Eigen::VectorXd& ev = es.eigenvalues();
    const Eigen::MatrixXd& vec = es.eigenvectors();
    for (int i = 0; i < n; ++i) {
        double x = ev[i];
        double w = b[0] * vec(0, i) * vec(0, i);
        // Newton polish on p_n, then Christoffel weights, which keep relative
        // accuracy in the tails where Golub-Welsch weights do not.
        for (int it = 0; it < 3; ++it) {
            const PolyEval e = eval_orthonormal(a, b, n, x);
            if (!std::isfinite(e.pn) || !std::isfinite(e.dpn) || e.dpn == 0.0) break;
            const double dx = e.pn / e.dpn;
            if (!(std::abs(dx) < 1e-6 * (1.0 + std::abs(x)))) break;
            x -= dx;
        }
        const PolyEval e = eval_orthonormal(a, b, n, x);
        if (std::isfinite(e.sumsq) && e.sumsq > 0.0) w = 1.0 / e.sumsq;
        r.nodes[i] = x;
        r.weights[i] = w;
    }
    return r;
}

QuadratureRule hermite_rule(int n) {
    check_order(n);
    std::vector<double> a(n + 1, 0.0), b(n + 1);
    b[0] = 1.0;
    for (int k = 1; k <= n; ++k) b[k] = k;
    QuadratureRule r = rule_from_recurrence(a, b, n);
    // Enforce exact mirror symmetry.
    for (int i = 0; i < n / 2; ++i) {
        const int j = n - 1 - i;
        const double x = 0.5 * (r.nodes[j] - r.nodes[i]);
        const double w = 0.5 * (r.weights[i] + r.weights[j]);
        r.nodes[i] = -x;
        r.nodes[j] = x;
        r.weights[i] = r.weights[j] = w;
    }
    if (n % 2 == 1) r.nodes[n / 2] = 0.0;
    return r;
}

QuadratureRule legendre_rule(int n) {
    check_order(n);
    std::vector<double> a(n + 1, 0.0), b(n + 1);
    b[0] = 1.0;
    for (int k = 1; k <= n; ++k) b[k] = double(k) * k / (4.0 * k * k - 1.0);
    QuadratureRule r = rule_from_recurrence(a, b, n);
    for (int i = 0; i < n / 2; ++i) {
        const int j = n - 1 - i;
        const double x = 0.5 * (r.nodes[j] - r.nodes[i]);
        const double w = 0.5 * (r.weights[i] + r.weights[j]);
        r.nodes[i] = -x;
        r.nodes[j] = x;
        r.weights[i] = r.weights[j] = w;
    }
    if (n % 2 == 1) r.nodes[n / 2] = 0.0;
    return r;
}

QuadratureRule half_hermite_rule(int n) {
    check_order(n);
    std::vector<double> a, b;
    half_normal_recurrence(n, a, b);
    b[0] = 1.0; // the discretization loses nothing measurable
    return rule_from_recurrence(a, b, n);
}

QuadratureRule split_hermite_rule(int n) {
    const QuadratureRule h = half_hermite_rule(n);
    QuadratureRule r;
    r.nodes.resize(2 * n);
    r.weights.resize(2 * n);
    for (int i = 0; i < n; ++i) {
        r.nodes[n - 1 - i] = -h.nodes[i];
        r.nodes[n + i] = h.nodes[i];
        r.weights[n - 1 - i] = r.weights[n + i] = 0.5 * h.weights[i];
    }
    return r;
}

double clamp_correlation(double c) {
    if (!(std::abs(c) <= 1.0 + kCorrelationSlack))
        throw DomainError(fmt::format("correlation {} outside [-1, 1]", c));
    return std::clamp(c, -1.0, 1.0);
}

void throw_non_finite(double node, double value) {
    throw EvaluationError(fmt::format("integrand is {} at node {}", value, node), node);
}

Engine::Engine(int order)
    : order_(order),
      hermite_(hermite_rule(order)),
      split_(split_hermite_rule(order)),
      half_(),
      angular_(legendre_rule(std::max(16, order / 2))) {
    half_.nodes.assign(split_.nodes.begin() + order, split_.nodes.end());
    half_.weights.assign(split_.weights.begin() + order, split_.weights.end());
    for (double& w : half_.weights) w *= 2.0;
}

const Engine& Engine::at(int order) {
    static std::mutex mu;
    static std::map<int, std::unique_ptr<const Engine>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(order);
    if (it == cache.end()) it = cache.emplace(order, std::make_unique<const Engine>(order)).first;
    return *it->second;
}

} // namespace sigprop::gauss
