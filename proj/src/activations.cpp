#include "sigprop/activations.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <numbers>

namespace sigprop {

namespace {

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double sech2(double x) {
    const double t = std::tanh(x);
    return (1.0 - t) * (1.0 + t);
}

// Derivatives of x * sigmoid(x).
double silu0(double x) { return x * sigmoid(x); }
double silu1(double x) {
    const double s = sigmoid(x);
    return s + x * s * (1.0 - s);
}
double silu2(double x) {
    const double s = sigmoid(x);
    return s * (1.0 - s) * (2.0 + x * (1.0 - 2.0 * s));
}

std::string fmt_param(double v) { return fmt::format("{}", v); }

} // namespace

Activation Activation::relu() {
    Activation a = relu_like(1.0, 0.0);
    a.name_ = "relu";
    return a;
}

Activation Activation::relu_like(double lambda, double beta) {
    if (!std::isfinite(lambda) || !std::isfinite(beta))
        throw DomainError("relu-like slopes must be finite");
    if (lambda == 0.0 && beta == 0.0) throw DomainError("relu-like with lambda = beta = 0 is identically zero");
    Activation a(ActivationKind::relu_like, "relu-like");
    a.slopes_ = ReluSlopes{lambda, beta};
    a.phi2_dirac_ = lambda != beta;
    a.kink_ = lambda != beta;
    a.class_a_ = !a.phi2_dirac_;
    return a;
}

Activation Activation::linear() {
    Activation a = relu_like(1.0, 1.0);
    a.name_ = "linear";
    return a;
}

Activation Activation::tanh() {
    Activation a(ActivationKind::tanh, "tanh");
    a.class_a_ = true;
    a.tanh_like_ = true;
    return a;
}

Activation Activation::elu() {
    Activation a(ActivationKind::elu, "elu");
    a.class_a_ = true;
    a.kink_ = true; // phi'' jumps from 1 to 0 at the origin
    return a;
}

Activation Activation::silu() {
    Activation a(ActivationKind::silu, "silu");
    a.class_a_ = true;
    return a;
}

Activation Activation::ssoftplus() {
    Activation a(ActivationKind::ssoftplus, "ssoftplus");
    a.class_a_ = true;
    return a;
}

Activation Activation::xtanh(double alpha) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DomainError("xtanh requires alpha > 0");
    Activation a(ActivationKind::xtanh, "xtanh");
    a.alpha_ = alpha;
    a.class_a_ = true;
    // x + alpha tanh(x) is unbounded, so it is not Tanh-like.
    return a;
}

Activation Activation::msilu() {
    Activation a(ActivationKind::msilu, "msilu");
    a.class_a_ = true;
    return a;
}

std::string Activation::spec() const {
    switch (kind_) {
    case ActivationKind::relu_like:
        if (name_ == "relu" || name_ == "linear") return name_;
        return fmt::format("relu-like:lambda={},beta={}", fmt_param(slopes_->lambda), fmt_param(slopes_->beta));
    case ActivationKind::xtanh:
        return fmt::format("xtanh:alpha={}", fmt_param(alpha_));
    default:
        return name_;
    }
}

double Activation::phi(double x) const {
    switch (kind_) {
    case ActivationKind::relu_like:
        return x > 0.0 ? slopes_->lambda * x : slopes_->beta * x;
    case ActivationKind::tanh:
        return std::tanh(x);
    case ActivationKind::elu:
        return x >= 0.0 ? x : std::expm1(x);
    case ActivationKind::silu:
        return silu0(x);
    case ActivationKind::ssoftplus:
        return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0) - std::numbers::ln2;
    case ActivationKind::xtanh:
        return x + alpha_ * std::tanh(x);
    case ActivationKind::msilu:
        return silu0(x) + 0.25 * std::expm1(-x * x);
    }
    return 0.0;
}

double Activation::phi1(double x) const {
    switch (kind_) {
    case ActivationKind::relu_like:
        return x > 0.0 ? slopes_->lambda : slopes_->beta;
    case ActivationKind::tanh:
        return sech2(x);
    case ActivationKind::elu:
        return x >= 0.0 ? 1.0 : std::exp(x);
    case ActivationKind::silu:
        return silu1(x);
    case ActivationKind::ssoftplus:
        return sigmoid(x);
    case ActivationKind::xtanh:
        return 1.0 + alpha_ * sech2(x);
    case ActivationKind::msilu:
        return silu1(x) - 0.5 * x * std::exp(-x * x);
    }
    return 0.0;
}

double Activation::phi2(double x) const {
    switch (kind_) {
    case ActivationKind::relu_like:
        return 0.0;
    case ActivationKind::tanh:
        return -2.0 * std::tanh(x) * sech2(x);
    case ActivationKind::elu:
        return x >= 0.0 ? 0.0 : std::exp(x);
    case ActivationKind::silu:
        return silu2(x);
    case ActivationKind::ssoftplus: {
        const double s = sigmoid(x);
        return s * (1.0 - s);
    }
    case ActivationKind::xtanh:
        return -2.0 * alpha_ * std::tanh(x) * sech2(x);
    case ActivationKind::msilu:
        return silu2(x) + (x * x - 0.5) * std::exp(-x * x);
    }
    return 0.0;
}

std::vector<std::string> builtin_names() {
    return {"relu", "relu-like", "linear", "tanh", "elu", "silu", "ssoftplus", "xtanh", "msilu"};
}

Activation builtin(std::string_view name, const std::map<std::string, double>& params) {
    auto param = [&](const char* key) -> std::optional<double> {
        auto it = params.find(key);
        if (it == params.end()) return std::nullopt;
        return it->second;
    };
    auto allow_only = [&](std::initializer_list<const char*> keys) {
        for (const auto& [k, v] : params) {
            bool ok = false;
            for (const char* key : keys) ok = ok || k == key;
            if (!ok) throw DomainError(fmt::format("activation '{}' has no parameter '{}'", name, k));
        }
    };

    if (name == "relu-like") {
        allow_only({"lambda", "beta"});
        auto l = param("lambda"), b = param("beta");
        if (!l || !b) throw DomainError("relu-like requires lambda and beta");
        return Activation::relu_like(*l, *b);
    }
    if (name == "xtanh") {
        allow_only({"alpha"});
        auto a = param("alpha");
        if (!a) throw DomainError("xtanh requires alpha");
        return Activation::xtanh(*a);
    }
    allow_only({});
    if (name == "relu") return Activation::relu();
    if (name == "linear") return Activation::linear();
    if (name == "tanh") return Activation::tanh();
    if (name == "elu") return Activation::elu();
    if (name == "silu") return Activation::silu();
    if (name == "ssoftplus") return Activation::ssoftplus();
    if (name == "msilu") return Activation::msilu();
    throw DomainError(fmt::format("unknown activation '{}'", name));
}

Activation parse_activation(std::string_view spec) {
    const auto colon = spec.find(':');
    const std::string_view name = spec.substr(0, colon);
    std::map<std::string, double> params;
    if (colon != std::string_view::npos) {
        std::string_view rest = spec.substr(colon + 1);
        if (rest.empty()) throw DomainError("empty parameter list in activation spec");
        while (!rest.empty()) {
            const auto comma = rest.find(',');
            const std::string_view item = rest.substr(0, comma);
            const auto eq = item.find('=');
            if (eq == std::string_view::npos || eq == 0)
                throw DomainError(fmt::format("malformed activation parameter '{}'", item));
            const std::string key(item.substr(0, eq));
            const std::string_view val = item.substr(eq + 1);
            double v = 0.0;
            const auto res = std::from_chars(val.data(), val.data() + val.size(), v);
            if (res.ec != std::errc() || res.ptr != val.data() + val.size())
                throw DomainError(fmt::format("activation parameter '{}' is not a number", key));
            if (!params.emplace(key, v).second) throw DomainError(fmt::format("duplicate parameter '{}'", key));
            if (comma == std::string_view::npos) break;
            rest = rest.substr(comma + 1);
            if (rest.empty()) throw DomainError("trailing comma in activation spec");
        }
    }
    return builtin(name, params);
}

Lemma5Report check_lemma5(const Activation& act, const std::vector<double>& grid) {
    if (act.phi2_distributional())
        throw UnsupportedError(fmt::format("{} has a distributional second derivative", act.name()));
    Lemma5Report r;
    for (double x : grid) {
        const double p = act.phi(x);
        if (x * p * act.phi1(x) < 0.0) r.x_phi_phi1_violations.push_back(x);
        if (p * act.phi2(x) > 0.0) r.phi_phi2_violations.push_back(x);
    }
    r.holds = r.x_phi_phi1_violations.empty() && r.phi_phi2_violations.empty();
    return r;
}

double eval(const Activation& act, Deriv d, double x) {
    switch (d) {
    case Deriv::d0:
        return act.phi(x);
    case Deriv::d1:
        return act.phi1(x);
    case Deriv::d2:
        return act.phi2(x);
    }
    return 0.0;
}

namespace {
void reject_dirac(const Activation& act, Deriv i, Deriv j) {
    if (act.phi2_distributional() && (i == Deriv::d2 || j == Deriv::d2))
        throw UnsupportedError(fmt::format("{}: second derivative contains a point mass; use closed forms",
                                           act.spec()));
}
} // namespace

double moment(const Activation& act, Deriv i, Deriv j, double x, const gauss::Engine& eng) {
    reject_dirac(act, i, j);
    return eng.expect1([&](double z) { return eval(act, i, z) * eval(act, j, z); }, x);
}

double moment2(const Activation& act, Deriv i, Deriv j, double qa, double qb, double c,
               const gauss::Engine& eng) {
    reject_dirac(act, i, j);
    return eng.expect2([&](double z) { return eval(act, i, z); }, [&](double z) { return eval(act, j, z); }, qa,
                       qb, c);
}

} // namespace sigprop
