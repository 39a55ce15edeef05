#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace gridshed {

enum class PolicyKind { linear, lstm };

struct PolicyArch {
    PolicyKind kind = PolicyKind::lstm;
    int hidden_size = 32; // ignored for linear policies
};

// Flat parameter vector; layout:
//   linear: W (output x input, row-major), bias (output)
//   lstm:   for each gate in {input, forget, cell, output}:
//             Wx (hidden x input), Wh (hidden x hidden), b (hidden)
//           then head W (output x hidden), head bias (output)
struct PolicyParams {
    PolicyArch arch;
    int input_dim = 0;
    int output_dim = 0;
    std::vector<double> theta;
};

std::size_t param_count(const PolicyArch& arch, int input_dim, int output_dim);

// All-zero parameters (raw outputs all zero for any input).
PolicyParams make_policy(const PolicyArch& arch, int input_dim, int output_dim);

struct HiddenState {
    std::vector<double> h, c; // empty for linear policies
};

HiddenState initial_hidden(const PolicyParams& params);

inline constexpr double kStdFloor = 1e-8;

// Single-pass running mean/variance of observations.
struct RunningStats {
    std::uint64_t count = 0;
    std::vector<double> mean; // per coordinate
    std::vector<double> m2;   // sum of squared deviations

    RunningStats() = default;
    explicit RunningStats(int dim) : mean(dim, 0.0), m2(dim, 0.0) {}

    int dim() const { return static_cast<int>(mean.size()); }
    // Population standard deviation, floored at kStdFloor; all ones while
    // count <= 1 so fresh stats normalize to the identity.
    std::vector<double> std_dev() const;
};

// Welford update.  Throws std::invalid_argument on dimension mismatch.
void stats_update(RunningStats& stats, std::span<const double> obs);

// (obs - mean) / std with the frozen stats handed in.
std::vector<double> normalize(std::span<const double> obs, const RunningStats& stats);

struct ActionBounds {
    double lo = -0.2;
    double hi = 0.0;
};

// Raw policy output for one observation; advances the hidden state in place.
// Deterministic: identical (params, obs, hidden) give identical outputs.
std::vector<double> policy_forward(const PolicyParams& params,
                                   std::span<const double> obs,
                                   HiddenState& hidden);

// Maps raw outputs into [lo, hi]: lo + (tanh(raw) + 1)/2 * (hi - lo).
std::vector<double> squash_action(std::span<const double> raw, const ActionBounds& bounds);

// theta + sign * nu * delta.  sign must be +1 or -1.
PolicyParams perturb(const PolicyParams& params, std::span<const double> delta,
                     double nu, int sign);

} // namespace gridshed
