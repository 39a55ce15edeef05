#pragma once

#include <span>

#include "gridshed/gridsim.hpp"

namespace gridshed {

struct RewardWeights {
    double c1 = 1.0;     // voltage deficit weight
    double c2 = 5.0;     // shed amount weight
    double c3 = 1.0;     // invalid shed command weight
    double c4 = 2.5e-5;  // barrier weight; 0 turns the barrier off entirely
    double terminal_penalty = -1000.0;
    // Per-bus barrier terms are capped once voltage is within this margin of
    // (or below) the threshold, at 1/barrier_margin^2.
    double barrier_margin = 1e-3;

    double barrier_cap() const { return 1.0 / (barrier_margin * barrier_margin); }
};

// Throws ConfigError on non-positive c1..c3, negative c4, non-negative
// terminal penalty, or non-positive margin.
void validate(const RewardWeights& weights);

struct RewardBreakdown {
    double delta_v_term = 0.0;   // sum of per-bus voltage deficits, <= 0
    double shed_term = 0.0;      // total p.u. shed this step
    double invalid_term = 0.0;   // invalid shed command count
    double barrier_term = 0.0;   // barrier value, >= 0
    double terminal_term = 0.0;  // terminal penalty when recovery failed, else 0
    double total = 0.0;          // c1*delta_v - c2*shed - c3*invalid - c4*barrier + terminal
};

// min(voltage - threshold, 0) against the recovery envelope in force at t_s.
// Throws std::invalid_argument when t_s is not strictly after clearance.
double delta_v(double voltage, double t_s, double t_clear_s);

// Deficit/shedding/invalid-command reward for one step; the terminal penalty
// replaces everything else once recovery has failed.  Steps at or before
// clearance score 0.
double base_reward(const StepInfo& info, const RewardWeights& weights);

// Sum over buses of 1/(V - threshold)^2, each term capped at barrier_cap()
// when V is within barrier_margin of (or below) the threshold.  Zero at or
// before clearance.
double barrier(std::span<const double> voltages, double t_s, double t_clear_s,
               const RewardWeights& weights);

// base_reward minus c4 * barrier, with the pieces kept separate.
RewardBreakdown combined_reward(const StepInfo& info, const RewardWeights& weights);

} // namespace gridshed
