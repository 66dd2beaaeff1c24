#pragma once

#include "sigprop/gauss.hpp"

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sigprop {

enum class ActivationKind { relu_like, tanh, elu, silu, ssoftplus, xtanh, msilu };

struct ReluSlopes {
    double lambda; // slope for x > 0
    double beta;   // slope for x <= 0
};

// Pure value type: the name plus its parameters fully determine it.
class Activation {
public:
    static Activation relu();
    static Activation relu_like(double lambda, double beta);
    static Activation linear(); // relu-like(1, 1)
    static Activation tanh();
    static Activation elu();
    static Activation silu();
    static Activation ssoftplus();
    static Activation xtanh(double alpha);
    static Activation msilu();

    ActivationKind kind() const { return kind_; }
    const std::string& name() const { return name_; }
    std::string spec() const; // parseable by parse_activation

    double phi(double x) const;
    double phi1(double x) const;
    // Classical second derivative; the point mass of a ReLU-like kink is not
    // represented (see phi2_distributional).
    double phi2(double x) const;

    const std::optional<ReluSlopes>& relu_slopes() const { return slopes_; }
    bool is_relu_like() const { return slopes_.has_value(); }
    bool class_a() const { return class_a_; }
    bool tanh_like() const { return tanh_like_; }
    bool phi2_distributional() const { return phi2_dirac_; }
    bool arcsin_kernel() const { return slopes_.has_value(); } // closed-form kernels available
    bool has_kink() const { return kink_; }                     // non-smooth at 0
    double alpha() const { return alpha_; } // xtanh only

    bool operator==(const Activation& o) const {
        return kind_ == o.kind_ && name_ == o.name_ && alpha_ == o.alpha_ &&
               (slopes_.has_value() == o.slopes_.has_value()) &&
               (!slopes_ || (slopes_->lambda == o.slopes_->lambda && slopes_->beta == o.slopes_->beta));
    }

private:
    Activation(ActivationKind k, std::string name) : kind_(k), name_(std::move(name)) {}

    ActivationKind kind_;
    std::string name_;
    std::optional<ReluSlopes> slopes_;
    double alpha_ = 0.0;
    bool class_a_ = false;
    bool tanh_like_ = false;
    bool phi2_dirac_ = false;
    bool kink_ = false;
};

// name in {relu, relu-like, linear, tanh, elu, silu, ssoftplus, xtanh, msilu};
// params: relu-like takes lambda, beta; xtanh takes alpha.
Activation builtin(std::string_view name, const std::map<std::string, double>& params = {});

// "tanh", "xtanh:alpha=0.5", "relu-like:lambda=1,beta=0.1".
Activation parse_activation(std::string_view spec);

std::vector<std::string> builtin_names();

struct Lemma5Report {
    bool holds = true;
    std::vector<double> x_phi_phi1_violations; // x phi(x) phi'(x) < 0
    std::vector<double> phi_phi2_violations;   // phi(x) phi''(x) > 0
};

// Sign conditions x phi phi' >= 0 and phi phi'' <= 0 on a grid.
Lemma5Report check_lemma5(const Activation& act, const std::vector<double>& grid);

enum class Deriv { d0 = 0, d1 = 1, d2 = 2 };

double eval(const Activation& act, Deriv d, double x);

// E[phi^(i)(sqrt(x) Z) phi^(j)(sqrt(x) Z)].
double moment(const Activation& act, Deriv i, Deriv j, double x, const gauss::Engine& eng);

// E[phi^(i)(sqrt(qa) Z1) phi^(j)(sqrt(qb) U2(c))].
double moment2(const Activation& act, Deriv i, Deriv j, double qa, double qb, double c,
               const gauss::Engine& eng);

} // namespace sigprop
