#include "gridshed/reward.hpp"

#include <algorithm>
#include <stdexcept>

#include "gridshed/errors.hpp"

namespace gridshed {

namespace {

constexpr double kTimeEps = 1e-9;

// delta_v and barrier share the recovery envelope with the violation checker
// so the three can never drift apart.
const SafetyEnvelope kEnvelope{};

bool after_clearance(double t_s, double t_clear_s) {
    return t_s > t_clear_s + kTimeEps;
}

} // namespace

void validate(const RewardWeights& weights) {
    if (weights.c1 <= 0.0 || weights.c2 <= 0.0 || weights.c3 <= 0.0)
        throw ConfigError("c1, c2, c3 must be positive");
    if (weights.c4 < 0.0) throw ConfigError("c4 must be non-negative");
    if (weights.terminal_penalty >= 0.0)
        throw ConfigError("terminal_penalty must be negative");
    if (weights.barrier_margin <= 0.0)
        throw ConfigError("barrier_margin must be positive");
}

double delta_v(double voltage, double t_s, double t_clear_s) {
    if (!after_clearance(t_s, t_clear_s))
        throw std::invalid_argument("delta_v is defined only after fault clearance");
    const double threshold = envelope_threshold(kEnvelope, t_s, t_clear_s);
    return std::min(voltage - threshold, 0.0);
}

double base_reward(const StepInfo& info, const RewardWeights& weights) {
    if (!after_clearance(info.t_s, info.t_clear_s)) return 0.0;
    if (recovery_failed(info.t_s, info.t_clear_s, info.voltages))
        return weights.terminal_penalty;

    double deficit = 0.0;
    for (double v : info.voltages) deficit += delta_v(v, info.t_s, info.t_clear_s);
    double shed = 0.0;
    for (double s : info.shed_amounts) shed += s;
    return weights.c1 * deficit - weights.c2 * shed - weights.c3 * info.invalid_actions;
}

double barrier(std::span<const double> voltages, double t_s, double t_clear_s,
               const RewardWeights& weights) {
    if (!after_clearance(t_s, t_clear_s)) return 0.0;
    const double threshold = envelope_threshold(kEnvelope, t_s, t_clear_s);
    const double cap = weights.barrier_cap();
    double total = 0.0;
    for (double v : voltages) {
        const double gap = v - threshold;
        if (gap <= weights.barrier_margin) {
            total += cap;
        } else {
            total += 1.0 / (gap * gap);
        }
    }
    return total;
}

RewardBreakdown combined_reward(const StepInfo& info, const RewardWeights& weights) {
    RewardBreakdown out;
    out.barrier_term = barrier(info.voltages, info.t_s, info.t_clear_s, weights);
    if (after_clearance(info.t_s, info.t_clear_s) &&
        recovery_failed(info.t_s, info.t_clear_s, info.voltages)) {
        out.terminal_term = weights.terminal_penalty;
    } else if (after_clearance(info.t_s, info.t_clear_s)) {
        for (double v : info.voltages)
            out.delta_v_term += delta_v(v, info.t_s, info.t_clear_s);
        for (double s : info.shed_amounts) out.shed_term += s;
        out.invalid_term = info.invalid_actions;
    }
    out.total = weights.c1 * out.delta_v_term - weights.c2 * out.shed_term -
                weights.c3 * out.invalid_term - weights.c4 * out.barrier_term +
                out.terminal_term;
    return out;
}

} // namespace gridshed
