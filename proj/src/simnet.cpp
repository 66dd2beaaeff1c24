#include "sigprop/simnet.hpp"

#include "sigprop/csv.hpp"

#include <Eigen/Dense>
#include <fmt/format.h>

#include <atomic>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <thread>

namespace sigprop {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Independent stream per (seed, replicate).
std::mt19937_64 stream(std::uint64_t seed, int replicate) {
    std::seed_seq ss{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(replicate), 0x5167u};
    return std::mt19937_64(ss);
}

struct Layer {
    Matrix w;
    Vector b;
};

// Row-major fill; the draw order is part of the reproducibility contract.
Matrix draw_weights(std::mt19937_64& rng, int rows, int cols, double sigma_w2) {
    std::normal_distribution<double> n01;
    const double s = std::sqrt(sigma_w2 / cols);
    Matrix w(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) w(i, j) = s * n01(rng);
    return w;
}

Vector draw_vector(std::mt19937_64& rng, int n, double scale) {
    std::normal_distribution<double> n01;
    Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = scale * n01(rng);
    return v;
}

std::vector<Layer> draw_forward(std::mt19937_64& rng, const NetworkConfig& cfg) {
    std::vector<Layer> net(cfg.depth);
    const double sb = std::sqrt(cfg.params.sigma_b2);
    for (int l = 0; l < cfg.depth; ++l) {
        net[l].w = draw_weights(rng, cfg.widths[l + 1], cfg.widths[l], cfg.params.sigma_w2);
        net[l].b = draw_vector(rng, cfg.widths[l + 1], sb);
    }
    return net;
}

Vector apply_phi(const Activation& act, const Vector& y) {
    Vector out(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) out[i] = act.phi(y[i]);
    return out;
}

struct ReplicateResult {
    std::vector<double> qa, qb, c, ratio;
    int valid = 0; // layers with finite pre-activations
};

ReplicateResult run_replicate(const Vector& a, const Vector& b, const NetworkConfig& cfg, int rep,
                              const BackwardMode* mode) {
    std::mt19937_64 rng = stream(cfg.seed, rep);
    const std::vector<Layer> net = draw_forward(rng, cfg);
    const int L = cfg.depth;

    ReplicateResult r;
    r.qa.assign(L, kNaN);
    r.qb.assign(L, kNaN);
    r.c.assign(L, kNaN);
    r.ratio.assign(L, kNaN);
    std::vector<Vector> ya(L), yb(L);
    for (int l = 0; l < L; ++l) {
        const Vector& bias = net[l].b;
        if (l == 0) {
            ya[0] = net[0].w * a + bias;
            yb[0] = net[0].w * b + bias;
        } else {
            ya[l] = net[l].w * apply_phi(cfg.act, ya[l - 1]) + bias;
            yb[l] = net[l].w * apply_phi(cfg.act, yb[l - 1]) + bias;
        }
        if (!ya[l].allFinite() || !yb[l].allFinite()) break;
        const double n = double(ya[l].size());
        const double qa = ya[l].squaredNorm() / n, qb = yb[l].squaredNorm() / n;
        if (!std::isfinite(qa) || !std::isfinite(qb)) break;
        r.qa[l] = qa;
        r.qb[l] = qb;
        r.c[l] = ya[l].dot(yb[l]) / n / std::sqrt(qa * qb);
        r.valid = l + 1;
    }
    if (!mode) return r;

    // Backward weights for layers 2..L: the forward ones, or fresh draws.
    std::vector<Matrix> back;
    if (*mode == BackwardMode::independent) {
        back.resize(L);
        for (int l = 1; l < L; ++l) back[l] = draw_weights(rng, cfg.widths[l + 1], cfg.widths[l], cfg.params.sigma_w2);
    }
    Vector da = draw_vector(rng, cfg.widths[L], 1.0);
    if (r.valid < L) return r;
    Vector db = da;
    double t_next = da.dot(db);
    for (int l = L - 2; l >= 0; --l) {
        const Matrix& w = *mode == BackwardMode::tied ? net[l + 1].w : back[l + 1];
        Vector ga = w.transpose() * da, gb = w.transpose() * db;
        for (Eigen::Index i = 0; i < ga.size(); ++i) {
            ga[i] *= cfg.act.phi1(ya[l][i]);
            gb[i] *= cfg.act.phi1(yb[l][i]);
        }
        const double t = ga.dot(gb);
        r.ratio[l] = t / t_next;
        t_next = t;
        da = std::move(ga);
        db = std::move(gb);
    }
    return r;
}

void mean_se(const std::vector<ReplicateResult>& rs, std::vector<double> ReplicateResult::*field, int l, double& mean,
             double& se) {
    const double n = double(rs.size());
    double s = 0.0;
    for (const auto& r : rs) s += (r.*field)[l];
    mean = s / n;
    if (rs.size() < 2) {
        se = kNaN;
        return;
    }
    double ss = 0.0;
    for (const auto& r : rs) ss += ((r.*field)[l] - mean) * ((r.*field)[l] - mean);
    se = std::sqrt(ss / (n - 1.0) / n);
}

SampleStats sample(const std::vector<double>& a, const std::vector<double>& b, const NetworkConfig& cfg,
                   const BackwardMode* mode) {
    cfg.validate();
    const auto n0 = std::size_t(cfg.widths[0]);
    if (a.size() != n0 || b.size() != n0)
        throw DomainError(fmt::format("inputs must have dimension N_0 = {}", n0));
    const Vector va = Eigen::Map<const Vector>(a.data(), Eigen::Index(n0));
    const Vector vb = Eigen::Map<const Vector>(b.data(), Eigen::Index(n0));

    std::vector<ReplicateResult> results(cfg.replicates);
    int threads = cfg.threads > 0 ? cfg.threads : int(std::max(1u, std::thread::hardware_concurrency()));
    threads = std::min(threads, cfg.replicates);
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int r; (r = next.fetch_add(1)) < cfg.replicates;) results[r] = run_replicate(va, vb, cfg, r, mode);
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    // Fixed replicate order below keeps results independent of scheduling.
    SampleStats s;
    s.replicates = cfg.replicates;
    int valid = cfg.depth;
    for (const auto& r : results) valid = std::min(valid, r.valid);
    s.overflow = valid < cfg.depth;
    s.layers.resize(valid);
    for (int l = 0; l < valid; ++l) {
        LayerStats& ls = s.layers[l];
        mean_se(results, &ReplicateResult::qa, l, ls.qa_hat, ls.qa_se);
        mean_se(results, &ReplicateResult::qb, l, ls.qb_hat, ls.qb_se);
        mean_se(results, &ReplicateResult::c, l, ls.c_hat, ls.c_se);
        if (mode && l + 1 < valid) {
            mean_se(results, &ReplicateResult::ratio, l, ls.trace_ratio, ls.trace_ratio_se);
        } else {
            ls.trace_ratio = ls.trace_ratio_se = kNaN;
        }
    }
    return s;
}

} // namespace

NetworkConfig NetworkConfig::uniform(int depth, int input_dim, int width, const NetParams& p, const Activation& act,
                                     std::uint64_t seed, int replicates) {
    NetworkConfig c;
    c.depth = depth;
    c.widths.assign(std::size_t(std::max(depth, 0)) + 1, width);
    if (!c.widths.empty()) c.widths[0] = input_dim;
    c.params = p;
    c.act = act;
    c.seed = seed;
    c.replicates = replicates;
    return c;
}

void NetworkConfig::validate() const {
    if (depth < 1) throw DomainError("network depth must be >= 1");
    if (widths.size() != std::size_t(depth) + 1) throw DomainError("widths must list N_0 .. N_L");
    for (int w : widths)
        if (w < 1) throw DomainError("all widths must be >= 1");
    if (replicates < 1) throw DomainError("replicates must be >= 1");
    params.validate();
}

SampleStats forward_sample(const std::vector<double>& a, const std::vector<double>& b, const NetworkConfig& cfg) {
    return sample(a, b, cfg, nullptr);
}

SampleStats backward_sample(const std::vector<double>& a, const std::vector<double>& b, const NetworkConfig& cfg,
                            BackwardMode mode) {
    return sample(a, b, cfg, &mode);
}

InputPair make_input_pair(int dim, double q1a, double q1b, double c1, const NetParams& p) {
    p.validate();
    if (dim < 2) throw DomainError("input dimension must be >= 2");
    if (!(std::abs(c1) <= 1.0)) throw DomainError("c1 must be in [-1, 1]");
    const double A = (q1a - p.sigma_b2) / p.sigma_w2, B = (q1b - p.sigma_b2) / p.sigma_w2;
    if (A < 0.0 || B < 0.0)
        throw DomainError(fmt::format("first-layer variance must be >= sigma_b^2 = {}", p.sigma_b2));
    const double X = (c1 * std::sqrt(q1a * q1b) - p.sigma_b2) / p.sigma_w2;
    double rho = 0.0;
    if (A > 0.0 && B > 0.0) {
        rho = X / std::sqrt(A * B);
        if (std::abs(rho) > 1.0 + 1e-12)
            throw DomainError(fmt::format("correlation {} unreachable with sigma_b^2 = {}", c1, p.sigma_b2));
        rho = std::clamp(rho, -1.0, 1.0);
    } else if (std::abs(X) > 1e-12) {
        throw DomainError("zero-norm input cannot carry a cross moment");
    }
    // u = all ones, v = centred ramp; both with mean square 1 and orthogonal.
    std::vector<double> v(dim);
    double ss = 0.0;
    for (int j = 0; j < dim; ++j) {
        v[j] = j - 0.5 * (dim - 1);
        ss += v[j] * v[j];
    }
    const double scale = std::sqrt(dim / ss);
    InputPair out{std::vector<double>(dim), std::vector<double>(dim)};
    const double sa = std::sqrt(A), sbb = std::sqrt(B), perp = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    for (int j = 0; j < dim; ++j) {
        out.a[j] = sa;
        out.b[j] = sbb * (rho + perp * v[j] * scale);
    }
    return out;
}

double OutputField::coefficient_of_variation() const {
    const double n = double(value.size());
    if (value.size() < 2) throw DomainError("field too small");
    double m = 0.0;
    for (double v : value) m += v;
    m /= n;
    double ss = 0.0;
    for (double v : value) ss += (v - m) * (v - m);
    return std::sqrt(ss / (n - 1.0)) / std::abs(m);
}

double OutputField::adjacent_correlation() const {
    std::vector<double> u, w;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const int k = i * n + j;
            if (j + 1 < n) {
                u.push_back(value[k]);
                w.push_back(value[k + 1]);
            }
            if (i + 1 < n) {
                u.push_back(value[k]);
                w.push_back(value[k + n]);
            }
        }
    }
    if (u.size() < 2) throw DomainError("field too small");
    const double m = double(u.size());
    double mu = 0.0, mw = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        mu += u[i];
        mw += w[i];
    }
    mu /= m;
    mw /= m;
    double suu = 0.0, sww = 0.0, suw = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        suu += (u[i] - mu) * (u[i] - mu);
        sww += (w[i] - mw) * (w[i] - mw);
        suw += (u[i] - mu) * (w[i] - mw);
    }
    return suw / std::sqrt(suu * sww);
}

OutputField output_field(const NetworkConfig& cfg, int n, double lo, double hi) {
    cfg.validate();
    if (cfg.widths[0] != 2) throw DomainError("output_field needs a 2-dimensional input");
    if (n < 2) throw DomainError("grid needs at least 2 points per axis");
    if (!(hi > lo)) throw DomainError("grid range must satisfy lo < hi");
    std::mt19937_64 rng = stream(cfg.seed, 0);
    const std::vector<Layer> net = draw_forward(rng, cfg);

    OutputField f;
    f.n = n;
    const int m = n * n;
    Matrix x(2, m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const int k = i * n + j;
            x(0, k) = lo + (hi - lo) * j / (n - 1);
            x(1, k) = lo + (hi - lo) * i / (n - 1);
            f.x.push_back(x(0, k));
            f.y.push_back(x(1, k));
        }
    Matrix h = x;
    for (int l = 0; l < cfg.depth; ++l) {
        if (l > 0) h = h.unaryExpr([&](double v) { return cfg.act.phi(v); }).eval();
        Matrix y = net[l].w * h;
        y.colwise() += net[l].b;
        h = std::move(y);
    }
    f.value.resize(m);
    for (int k = 0; k < m; ++k) f.value[k] = h(0, k);
    return f;
}

void write_stats_csv(std::ostream& os, const SampleStats& s) {
    os << "layer,qa_hat,qa_se,qb_hat,qb_se,c_hat,c_se,trace_ratio,trace_ratio_se\n";
    for (std::size_t l = 0; l < s.layers.size(); ++l) {
        const LayerStats& r = s.layers[l];
        os << l + 1 << ',' << csv::num(r.qa_hat) << ',' << csv::num(r.qa_se) << ',' << csv::num(r.qb_hat) << ','
           << csv::num(r.qb_se) << ',' << csv::num(r.c_hat) << ',' << csv::num(r.c_se) << ','
           << csv::num(r.trace_ratio) << ',' << csv::num(r.trace_ratio_se) << '\n';
    }
}

void write_field_csv(std::ostream& os, const OutputField& f) {
    os << "x,y,value\n";
    for (std::size_t k = 0; k < f.value.size(); ++k)
        os << csv::num(f.x[k]) << ',' << csv::num(f.y[k]) << ',' << csv::num(f.value[k]) << '\n';
}

} // namespace sigprop
