#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "gridshed/parallel.hpp"
#include "gridshed/policy.hpp"

namespace gridshed {

struct ArsConfig {
    double alpha = 0.02;            // step size
    int num_directions = 16;        // perturbation directions per iteration
    double nu = 0.03;               // perturbation scale
    int top_b = 8;                  // directions kept for the update
    int rollouts_per_direction = 9; // must equal the task count
    double decay = 0.997;           // per-iteration multiplier on alpha and nu
    int iterations = 300;
    int eval_every = 5;             // greedy evaluation cadence
    double sigma_floor = 1e-8;      // below this, reward std is treated as 1
    std::uint64_t seed = 0;
    bool record_wall_time = true;   // false writes 0 for reproducible history files
};

// Throws ConfigError on non-positive sizes/rates, top_b > num_directions,
// or decay outside (0, 1].
void validate(const ArsConfig& config);

// Mean returns of one perturbation direction over the task set.
struct DirectionResult {
    int direction = 0;
    double reward_pos = 0.0;
    double reward_neg = 0.0;
    std::vector<double> delta;
    bool failed = false;

    double score() const { return reward_pos > reward_neg ? reward_pos : reward_neg; }
};

struct TopSelection {
    std::vector<int> indices; // into the DirectionResult span, best first
    double sigma_b = 1.0;     // population std of the selected 2b rewards
};

struct EvalRecord {
    int iteration = 0;
    double greedy_return = 0.0; // mean over the task set
    int violations = 0;         // total violation steps over the task set
    double alpha = 0.0;         // values used for this iteration
    double nu = 0.0;
    double wall_seconds = 0.0;
};

struct TrainHistory {
    std::vector<EvalRecord> evals;
};

// Snapshot handed to the evaluation callback; checkpoint writing hangs off
// this.  aborted marks the flush performed when training dies mid-run.
struct TrainSnapshot {
    const PolicyParams& params;
    const RunningStats& stats;
    EvalRecord record;
    bool is_best = false;
    bool aborted = false;
};

using EvalCallback = std::function<void(const TrainSnapshot&)>;

struct TrainResult {
    PolicyParams params;       // after the last iteration
    RunningStats stats;
    PolicyParams best_params;  // best greedy eval, zero-violation preferred
    RunningStats best_stats;
    EvalRecord best_record;
    TrainHistory history;
};

// n_directions standard-normal vectors of length dim, drawn sequentially.
std::vector<std::vector<double>> sample_directions(int n_directions, int dim,
                                                   std::mt19937_64& rng);

// Ranks directions by max(reward_pos, reward_neg), descending, ties to the
// lower index; keeps the best b and computes the population std of their 2b
// rewards (1.0 when it falls below sigma_floor).
TopSelection select_top(std::span<const DirectionResult> results, int b,
                        double sigma_floor);

// theta + alpha/(b*sigma_b) * sum over selected of (reward_pos - reward_neg)*delta.
std::vector<double> update_weights(std::span<const double> theta,
                                   std::span<const DirectionResult> results,
                                   const TopSelection& selection,
                                   double alpha);

inline std::pair<double, double> decay_step(double alpha, double nu, double decay) {
    return {alpha * decay, nu * decay};
}

// 2 * num_tasks rollouts of params +/- nu*delta through the backend, run
// inline in task order.
DirectionResult evaluate_direction(const RolloutBackend& backend, int num_tasks,
                                   const PolicyParams& params,
                                   std::span<const double> delta, double nu,
                                   const RunningStats& stats,
                                   std::uint64_t seed, int iteration, int direction);

// Greedy rollouts of a fixed policy over the task set, through run_jobs.
std::vector<RolloutResult> evaluate_policy(const RolloutBackend& backend,
                                           const PolicyParams& params,
                                           const RunningStats& stats, int num_tasks,
                                           int worker_count, bool retain_trajectory);

// Full random-search loop.  Normalization stats are frozen within an
// iteration and fold in every state visited by the 2*N*m rollouts at the end
// of it.  Deterministic for fixed config/seed, independent of worker_count.
// On an exception mid-run the callback fires once with aborted set (final
// checkpoint flush) before the exception propagates.
TrainResult train(const ArsConfig& config, const PolicyArch& arch,
                  int input_dim, int output_dim, const RolloutBackend& backend,
                  int num_tasks, int worker_count, const EvalCallback& on_eval = {});

} // namespace gridshed
