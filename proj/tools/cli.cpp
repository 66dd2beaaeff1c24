#include "cli.hpp"

#include "sigprop/csv.hpp"
#include "sigprop/dynamics.hpp"
#include "sigprop/eoc.hpp"
#include "sigprop/simnet.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>

namespace sigprop::cli {

namespace {

using csv::num;

struct Globals {
    int quad_order = gauss::kDefaultOrder;
    double tol = 1e-13;
    std::uint64_t seed = 1;
    std::string output;

    Numerics numerics() const {
        Numerics n;
        n.quad_order = quad_order;
        n.tol = tol;
        return n;
    }
};

// Self-describing '#' block ahead of every table.
class Header {
public:
    Header(const std::string& command, const Globals& g) {
        add("sigprop", kVersion);
        add("command", command);
        add("quad_order", std::to_string(g.quad_order));
        add("tol", num(g.tol));
        add("max_iter", std::to_string(Numerics{}.max_iter));
        add("seed", std::to_string(g.seed));
    }
    void add(const std::string& key, const std::string& value) { lines_.push_back("# " + key + ": " + value); }
    void write(std::ostream& os) const {
        for (const auto& l : lines_) os << l << '\n';
    }

private:
    std::vector<std::string> lines_;
};

std::string sanitize(std::string s) {
    std::replace(s.begin(), s.end(), ',', ';');
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

std::string opt_num(const std::optional<double>& v, const char* missing = "NA") {
    return v ? num(*v) : std::string(missing);
}

const char* regime(double chi) {
    if (std::abs(chi - 1.0) <= 1e-8) return "edge";
    return chi < 1.0 ? "ordered" : "chaotic";
}

// Resolves (sigma_b, sigma_w) and the limiting variance. Without sigma_w the
// EOC point at sigma_b is used.
struct Operating {
    NetParams params;
    std::optional<EocPoint> eoc;
    std::optional<double> q; // fixed point, if it exists
};

Operating resolve(const Activation& act, double sigma_b, std::optional<double> sigma_w, const Numerics& n) {
    Operating op;
    if (!sigma_w) {
        op.eoc = eoc_point(sigma_b, act, n);
        op.params = op.eoc->params;
        op.q = op.eoc->q;
        return op;
    }
    op.params = NetParams::from_sigmas(sigma_b, *sigma_w);
    const FixedPointReport fp = variance_fixed_point(op.params, act, n);
    if (fp.converged) op.q = fp.q;
    return op;
}

int cmd_eoc_curve(const Activation& act, const std::vector<double>& grid, const Globals& g, std::ostream& os) {
    Header h("eoc-curve", g);
    h.add("activation", act.spec());
    std::ostringstream body;
    body << "sigma_b,sigma_w,q,beta_q,error\n";
    int code = ok;
    if (auto s = act.relu_slopes()) {
        const EocPoint e = weak_eoc(s->lambda, s->beta);
        h.add("eoc", "weak (variance preserved layer to layer)");
        body << num(e.sigma_b) << ',' << num(e.sigma_w) << ",input-preserved,NA,\n";
    } else {
        h.add("sigma_b_grid", fmt::format("{} points", grid.size()));
        for (double sb : grid) {
            try {
                const EocPoint e = eoc_point(sb, act, g.numerics());
                body << num(sb) << ',' << num(e.sigma_w) << ',' << opt_num(e.q) << ',' << opt_num(e.beta_q) << ",\n";
            } catch (const NonConvergenceError& ex) {
                body << num(sb) << ",NA,NA,NA," << sanitize(ex.what()) << '\n';
                code = non_convergence;
            } catch (const NoEocError& ex) {
                body << num(sb) << ",NA,NA,NA," << sanitize(ex.what()) << '\n';
                if (code == ok) code = no_eoc;
            }
        }
    }
    h.write(os);
    os << body.str();
    return code;
}

int cmd_propagate(const Activation& act, double sigma_b, std::optional<double> sigma_w, double c1, int depth,
                  std::optional<double> q1, int every, const Globals& g, std::ostream& os) {
    const Numerics n = g.numerics();
    const Operating op = resolve(act, sigma_b, sigma_w, n);
    Header h("propagate", g);
    h.add("activation", act.spec());
    h.add("sigma_b", num(op.params.sigma_b()));
    h.add("sigma_w", num(op.params.sigma_w()));
    h.add("c1", num(c1));
    h.add("depth", std::to_string(depth));
    Trajectory t;
    if (op.eoc && (!q1 || (op.q && *q1 == *op.q) || op.eoc->weak)) {
        const double qin = q1.value_or(1.0);
        h.add("mode", op.eoc->weak ? "weak EOC, c <- f(c)" : "EOC, c <- f(c)");
        if (op.eoc->beta_q) h.add("beta_q", num(*op.eoc->beta_q));
        t = propagate_eoc(c1, depth, *op.eoc, act, n, qin);
    } else {
        if (!q1 && !op.q)
            throw NonConvergenceError("variance map has no finite fixed point; pass --q1 to set the input variance");
        const double qin = q1 ? *q1 : *op.q;
        h.add("mode", "full kernel recursion");
        h.add("q1", num(qin));
        h.add("chi1", num(chi1(op.q.value_or(qin), op.params, act, n)));
        t = propagate(qin, qin, c1, depth, op.params, act, n);
        if (t.diverged) h.add("diverged", fmt::format("variance exceeded {} after layer {}", n.diverge_at, t.size()));
    }
    h.write(os);
    write_trajectory_csv(os, t, every);
    return t.diverged ? non_convergence : ok;
}

int cmd_choose_sigmab(const Activation& act, double depth, const Globals& g, std::ostream& os) {
    const SigmaBChoice ch = choose_sigma_b(depth, act, g.numerics());
    Header h("choose-sigmab", g);
    h.add("activation", act.spec());
    h.add("rule", "beta_q = depth");
    std::string table;
    for (const auto& [sb, b] : ch.table) table += fmt::format("{}{}:{}", table.empty() ? "" : " ", num(sb), num(b));
    h.add("scan", table);
    h.write(os);
    os << "depth,sigma_b,sigma_w,q,beta_q\n";
    os << num(depth) << ',' << num(ch.sigma_b) << ',' << num(ch.point.sigma_w) << ',' << opt_num(ch.point.q) << ','
       << opt_num(ch.point.beta_q) << '\n';
    return ok;
}

struct SimulateArgs {
    double sigma_b = 0.0;
    std::optional<double> sigma_w;
    int depth = 30;
    int width = 300;
    int input_dim = 0;
    int replicates = 100;
    std::string mode = "independent";
    double c1 = 0.5;
    std::optional<double> q1;
};

int cmd_simulate(const Activation& act, const SimulateArgs& a, const Globals& g, std::ostream& os) {
    const Numerics n = g.numerics();
    const Operating op = resolve(act, a.sigma_b, a.sigma_w, n);
    const double q1 = a.q1 ? *a.q1 : op.q.value_or(1.0);
    const int dim = a.input_dim > 0 ? a.input_dim : a.width;
    const InputPair in = make_input_pair(dim, q1, q1, a.c1, op.params);
    NetworkConfig cfg = NetworkConfig::uniform(a.depth, dim, a.width, op.params, act, g.seed, a.replicates);

    SampleStats s = a.mode == "none" ? forward_sample(in.a, in.b, cfg)
                                     : backward_sample(in.a, in.b, cfg,
                                                       a.mode == "tied" ? BackwardMode::tied : BackwardMode::independent);
    const double chi = chi1(op.q.value_or(q1), op.params, act, n);
    Header h("simulate", g);
    h.add("activation", act.spec());
    h.add("sigma_b", num(op.params.sigma_b()));
    h.add("sigma_w", num(op.params.sigma_w()));
    h.add("depth", std::to_string(a.depth));
    h.add("width", std::to_string(a.width));
    h.add("input_dim", std::to_string(dim));
    h.add("replicates", std::to_string(a.replicates));
    h.add("backward", a.mode);
    h.add("q1", num(q1));
    h.add("c1", num(a.c1));
    h.add("chi1", num(chi));
    h.add("regime", regime(chi));
    if (s.overflow) h.add("overflow", fmt::format("non-finite activations; truncated at layer {}", s.layers.size()));
    h.write(os);
    write_stats_csv(os, s);
    return ok;
}

int cmd_rate_fit(const std::string& path, std::optional<long> from, std::optional<long> to, const Globals& g,
                 std::ostream& os) {
    std::ifstream in(path);
    if (!in) throw DomainError(fmt::format("cannot open '{}'", path));
    const Trajectory t = read_trajectory_csv(in);
    DecayFit f;
    if (from || to) {
        if (t.size() == 0) throw DomainError("empty trajectory");
        f = fit_decay(t, from.value_or(t.layer.front()), to.value_or(t.layer.back()));
    } else {
        f = fit_decay(t);
    }
    Header h("rate-fit", g);
    h.add("input", path);
    h.write(os);
    os << "kind,slope,constant,first,last,r2,power_slope,power_r2,exponential_rate,exponential_r2\n";
    os << (f.kind == DecayKind::power ? "power" : "exponential") << ',' << num(f.slope) << ',' << num(f.constant)
       << ',' << f.first << ',' << f.last << ',' << num(f.r2) << ',' << num(f.power.slope) << ','
       << num(f.power.r2) << ',' << num(f.exponential.slope) << ',' << num(f.exponential.r2) << '\n';
    return ok;
}

int cmd_output_field(const Activation& act, double sigma_b, std::optional<double> sigma_w, int depth, int width,
                     int grid, const Globals& g, std::ostream& os) {
    const Operating op = resolve(act, sigma_b, sigma_w, g.numerics());
    NetworkConfig cfg = NetworkConfig::uniform(depth, 2, width, op.params, act, g.seed, 1);
    const OutputField f = output_field(cfg, grid);
    Header h("output-field", g);
    h.add("activation", act.spec());
    h.add("sigma_b", num(op.params.sigma_b()));
    h.add("sigma_w", num(op.params.sigma_w()));
    h.add("depth", std::to_string(depth));
    h.add("width", std::to_string(width));
    h.add("grid", fmt::format("{}x{} on [0,1]^2", grid, grid));
    h.add("coefficient_of_variation", num(f.coefficient_of_variation()));
    h.add("adjacent_correlation", num(f.adjacent_correlation()));
    h.write(os);
    write_field_csv(os, f);
    return ok;
}

int cmd_sigma_max(const Activation& act, double x_hi, const Globals& g, std::ostream& os) {
    const SigmaMax s = sigma_max(act, x_hi, g.numerics());
    Header h("sigma-max", g);
    h.add("activation", act.spec());
    h.write(os);
    os << "sigma_max,argmax,x_hi,unbounded\n";
    os << num(s.value) << ',' << num(s.argmax) << ',' << num(s.x_hi) << ',' << (s.unbounded ? "true" : "false")
       << '\n';
    return ok;
}

Activation activation_arg(const std::string& spec) {
    try {
        return parse_activation(spec);
    } catch (const Error& e) {
        throw CLI::ValidationError("activation", e.what());
    }
}

} // namespace

std::vector<double> parse_grid(const std::string& text) {
    auto parse = [&](std::string_view s) {
        try {
            const double v = csv::parse_double(s);
            if (!std::isfinite(v)) throw DomainError("");
            return v;
        } catch (const DomainError&) {
            throw CLI::ValidationError("--sigma-b", fmt::format("'{}' is not a finite number", s));
        }
    };
    std::vector<double> out;
    if (text.find(':') != std::string::npos) {
        const auto parts = csv::split(text, ':');
        if (parts.size() != 3) throw CLI::ValidationError("--sigma-b", "range must be start:stop:step");
        const double a = parse(parts[0]), b = parse(parts[1]), step = parse(parts[2]);
        if (!(step > 0.0) || b < a) throw CLI::ValidationError("--sigma-b", "need step > 0 and stop >= start");
        const long count = long(std::floor((b - a) / step + 1e-9)) + 1;
        if (count > 100000) throw CLI::ValidationError("--sigma-b", "grid too large");
        for (long i = 0; i < count; ++i) out.push_back(std::stod(fmt::format("{:.12g}", a + double(i) * step)));
    } else {
        for (const auto& p : csv::split(text, ',')) out.push_back(parse(p));
    }
    for (double v : out)
        if (v < 0.0) throw CLI::ValidationError("--sigma-b", "sigma_b must be >= 0");
    return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Mean-field signal propagation toolkit: EOC curves, kernel dynamics and network simulation",
                 "sigprop"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);
    Globals g;
    app.add_option("--quad-order", g.quad_order, "quadrature order (nodes per half-line)")
        ->check(CLI::Range(8, gauss::kMaxOrder / 2))
        ->capture_default_str();
    app.add_option("--tol", g.tol, "fixed-point tolerance on |dq|")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_option("--seed", g.seed, "random seed")->capture_default_str();
    app.add_option("-o,--output", g.output, "write the table to this file instead of stdout");

    std::string spec;
    auto add_act = [&](CLI::App* sub) { sub->add_option("activation", spec, "activation spec, e.g. tanh, xtanh:alpha=0.5")->required(); };

    auto* curve = app.add_subcommand("eoc-curve", "EOC points over a sigma_b grid");
    add_act(curve);
    std::string grid_text = "0:1:0.05";
    curve->add_option("--sigma-b", grid_text, "start:stop:step, comma list, or one value")->capture_default_str();

    auto* prop = app.add_subcommand("propagate", "iterate the kernel recursion over depth");
    add_act(prop);
    double sigma_b = 0.0;
    std::optional<double> sigma_w, q1;
    double c1 = 0.1;
    int depth = 1000, every = 1;
    prop->add_option("--sigma-b", sigma_b, "bias standard deviation")->check(CLI::NonNegativeNumber);
    prop->add_option("--sigma-w", sigma_w, "weight standard deviation (default: EOC value)")
        ->check(CLI::PositiveNumber);
    prop->add_option("--c1", c1, "input correlation")->check(CLI::Range(-1.0, 1.0))->capture_default_str();
    prop->add_option("--depth", depth, "number of layers")->check(CLI::Range(1, 100000000))->capture_default_str();
    prop->add_option("--q1", q1, "first-layer variance")->check(CLI::NonNegativeNumber);
    prop->add_option("--every", every, "keep every k-th layer in the output")->check(CLI::PositiveNumber);

    auto* choose = app.add_subcommand("choose-sigmab", "sigma_b with beta_q matched to a depth");
    add_act(choose);
    double target = 0.0;
    choose->add_option("--depth", target, "network depth L")->required()->check(CLI::Range(1.0, 1e9));

    auto* sim = app.add_subcommand("simulate", "Monte-Carlo finite-width networks");
    add_act(sim);
    SimulateArgs sa;
    sim->add_option("--sigma-b", sa.sigma_b)->check(CLI::NonNegativeNumber);
    sim->add_option("--sigma-w", sa.sigma_w, "(default: EOC value)")->check(CLI::PositiveNumber);
    sim->add_option("--depth", sa.depth)->check(CLI::Range(2, 100000))->capture_default_str();
    sim->add_option("--width", sa.width)->check(CLI::Range(1, 100000))->capture_default_str();
    sim->add_option("--input-dim", sa.input_dim, "(default: width)")->check(CLI::Range(2, 100000));
    sim->add_option("--replicates", sa.replicates)->check(CLI::Range(1, 1000000))->capture_default_str();
    sim->add_option("--mode", sa.mode, "backward weights")
        ->check(CLI::IsMember({"independent", "tied", "none"}))
        ->capture_default_str();
    sim->add_option("--c1", sa.c1)->check(CLI::Range(-1.0, 1.0))->capture_default_str();
    sim->add_option("--q1", sa.q1, "first-layer variance (default: fixed point)")->check(CLI::PositiveNumber);

    auto* fit = app.add_subcommand("rate-fit", "fit power and exponential decay of 1 - c");
    std::string path;
    std::optional<long> from, to;
    fit->add_option("trajectory", path, "trajectory CSV")->required();
    fit->add_option("--from", from, "first layer of the window")->check(CLI::PositiveNumber);
    fit->add_option("--to", to, "last layer of the window")->check(CLI::PositiveNumber);

    auto* field = app.add_subcommand("output-field", "one network evaluated on a grid of 2-D inputs");
    add_act(field);
    double fsb = 0.0;
    std::optional<double> fsw;
    int fdepth = 20, fwidth = 300, fgrid = 30;
    field->add_option("--sigma-b", fsb)->check(CLI::NonNegativeNumber);
    field->add_option("--sigma-w", fsw, "(default: EOC value)")->check(CLI::PositiveNumber);
    field->add_option("--depth", fdepth)->check(CLI::Range(1, 10000))->capture_default_str();
    field->add_option("--width", fwidth)->check(CLI::Range(1, 100000))->capture_default_str();
    field->add_option("--grid", fgrid)->check(CLI::Range(2, 2000))->capture_default_str();

    auto* smax = app.add_subcommand("sigma-max", "upper end of the EOC curve");
    add_act(smax);
    double x_hi = 100.0;
    smax->add_option("--x-hi", x_hi)->check(CLI::Range(1e-5, 1e8))->capture_default_str();

    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    std::vector<double> grid;
    Activation act = Activation::tanh();
    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
        if (!spec.empty()) act = activation_arg(spec);
        if (curve->parsed()) grid = parse_grid(grid_text);
        if (fit->parsed() && from && to && *to < *from) throw CLI::ValidationError("--to", "must be >= --from");
    } catch (const CLI::CallForHelp& e) {
        app.exit(e, out, err);
        return ok;
    } catch (const CLI::CallForAllHelp& e) {
        app.exit(e, out, err);
        return ok;
    } catch (const CLI::CallForVersion& e) {
        app.exit(e, out, err);
        return ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n' << "run with --help for usage\n";
        return usage;
    }

    std::ostringstream body;
    int code = ok;
    try {
        if (curve->parsed()) code = cmd_eoc_curve(act, grid, g, body);
        else if (prop->parsed()) code = cmd_propagate(act, sigma_b, sigma_w, c1, depth, q1, every, g, body);
        else if (choose->parsed()) code = cmd_choose_sigmab(act, target, g, body);
        else if (sim->parsed()) code = cmd_simulate(act, sa, g, body);
        else if (fit->parsed()) code = cmd_rate_fit(path, from, to, g, body);
        else if (field->parsed()) code = cmd_output_field(act, fsb, fsw, fdepth, fwidth, fgrid, g, body);
        else if (smax->parsed()) code = cmd_sigma_max(act, x_hi, g, body);
    } catch (const NoEocError& e) {
        err << "no EOC: " << e.what() << '\n';
        return no_eoc;
    } catch (const BracketError& e) {
        err << "no solution: " << e.what() << '\n';
        for (const auto& [x, y] : e.table()) err << "  sigma_b=" << num(x) << " beta_q=" << num(y) << '\n';
        return no_eoc;
    } catch (const NonConvergenceError& e) {
        err << "non-convergence: " << e.what() << '\n';
        return non_convergence;
    } catch (const EvaluationError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return non_convergence;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return usage;
    }

    if (g.output.empty()) {
        out << body.str();
    } else {
        std::ofstream f(g.output, std::ios::binary);
        if (!f) {
            err << "error: cannot write '" << g.output << "'\n";
            return usage;
        }
        f << body.str();
    }
    return code;
}

} // namespace sigprop::cli
