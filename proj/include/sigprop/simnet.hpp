#pragma once

// Finite-width random networks
//   y^1 = W^1 a + B^1,   y^l = W^l phi(y^{l-1}) + B^l,
//   W^l_ij ~ N(0, sw2 / N_{l-1}),  B^l_i ~ N(0, sb2),
// sampled many times to estimate the kernels the mean-field maps predict.

#include "sigprop/meanfield.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace sigprop {

struct NetworkConfig {
    int depth = 30;
    std::vector<int> widths; // N_0 (input dimension) .. N_L
    NetParams params;
    Activation act = Activation::tanh();
    std::uint64_t seed = 1;
    int replicates = 100;
    int threads = 0; // 0: hardware concurrency

    static NetworkConfig uniform(int depth, int input_dim, int width, const NetParams& p, const Activation& act,
                                 std::uint64_t seed = 1, int replicates = 100);
    void validate() const;
};

enum class BackwardMode { tied, independent };

// Means over replicates with standard errors sd / sqrt(R). Ratios
// T^l / T^{l+1} of gradient traces are defined for l < L; NaN otherwise.
struct LayerStats {
    double qa_hat = 0.0, qa_se = 0.0;
    double qb_hat = 0.0, qb_se = 0.0;
    double c_hat = 0.0, c_se = 0.0;
    double trace_ratio = 0.0, trace_ratio_se = 0.0;
};

struct SampleStats {
    std::vector<LayerStats> layers; // index l - 1
    int replicates = 0;
    bool overflow = false; // non-finite activations; layers truncated at the last finite one
};

SampleStats forward_sample(const std::vector<double>& a, const std::vector<double>& b, const NetworkConfig& cfg);

// Forward statistics plus gradient traces T^l = sum_i delta^l_i(a) delta^l_i(b),
// seeded at the top by one standard Gaussian vector shared by a and b.
// Forward weights are drawn first, so forward columns match forward_sample.
SampleStats backward_sample(const std::vector<double>& a, const std::vector<double>& b, const NetworkConfig& cfg,
                            BackwardMode mode = BackwardMode::independent);

// Deterministic inputs of dimension dim whose first-layer kernel is
// (q1a, q1b, c1) under p.
struct InputPair {
    std::vector<double> a, b;
};
InputPair make_input_pair(int dim, double q1a, double q1b, double c1, const NetParams& p);

// One sampled network (stream of replicate 0) evaluated on an n x n grid of
// [lo, hi]^2; the value is the first neuron of the top layer. Needs N_0 = 2.
struct OutputField {
    int n = 0;
    std::vector<double> x, y, value; // row-major: x varies fastest

    double coefficient_of_variation() const; // sd / |mean|
    double adjacent_correlation() const;     // pooled Pearson over horizontal and vertical neighbours
};
OutputField output_field(const NetworkConfig& cfg, int n, double lo = 0.0, double hi = 1.0);

void write_stats_csv(std::ostream& os, const SampleStats& s);
void write_field_csv(std::ostream& os, const OutputField& f);

} // namespace sigprop
