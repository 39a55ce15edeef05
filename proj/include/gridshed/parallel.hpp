#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gridshed/gridsim.hpp"
#include "gridshed/policy.hpp"
#include "gridshed/reward.hpp"

namespace gridshed {

// One episode to evaluate.  (iteration, direction, sign, task_index)
// identifies the job; params/stats are immutable snapshots shared across the
// batch, so jobs can run on any thread in any order.
struct RolloutJob {
    int iteration = 0;
    int direction = 0;  // -1 for greedy evaluations
    int sign = 0;       // +1 / -1 for perturbations, 0 for greedy
    int task_index = 0;
    std::shared_ptr<const PolicyParams> params;
    std::shared_ptr<const RunningStats> stats;
    std::uint64_t rng_stream = 0;  // counter-derived stream id, used as episode seed
    bool retain_trajectory = false;
};

struct RolloutResult {
    int iteration = 0;
    int direction = 0;
    int sign = 0;
    int task_index = 0;
    double episode_return = 0.0;
    int steps = 0;
    int violation_steps = 0;     // (bus, step) pairs below the envelope
    bool terminated_early = false;
    bool failed = false;
    std::string error;
    std::vector<Observation> observations;     // every state visited, for stats
    // Populated only when the job asked for full retention.
    std::vector<StepInfo> trajectory;
    std::vector<RewardBreakdown> rewards;
    std::vector<std::vector<double>> actions;
};

// Anything that can turn a job into an episode result.  Implementations must
// be thread-safe and deterministic in the job fields alone.
class RolloutBackend {
public:
    virtual ~RolloutBackend() = default;
    virtual RolloutResult run(const RolloutJob& job) const = 0;
};

// Stream id for a job, mixed from the global seed and the job coordinates so
// the schedule cannot influence the draw.
std::uint64_t rng_stream_id(std::uint64_t seed, int iteration, int direction,
                            int sign, int task_index);

// Runs a batch on worker_count threads (0 = hardware concurrency).  Results
// come back indexed exactly like the jobs; a throwing job yields a result
// with failed set and the message captured, and never takes the batch down.
std::vector<RolloutResult> run_jobs(const RolloutBackend& backend,
                                    std::span<const RolloutJob> jobs,
                                    int worker_count);

// Policy-driven episode on the surrogate grid.
RolloutResult rollout(const GridModel& model, const Task& task,
                      const PolicyParams& params, const RunningStats& stats,
                      const RewardWeights& weights, const ActionBounds& bounds,
                      std::uint64_t seed, bool retain_trajectory);

// Episode driven by an arbitrary action source (time, observation) -> action.
// Used for the no-control baseline and scripted shedding schedules.
using ActionFn = std::function<std::vector<double>(double t_s, const Observation&)>;
RolloutResult scripted_rollout(const GridModel& model, const Task& task,
                               const RewardWeights& weights, const ActionFn& act,
                               bool retain_trajectory);

// The surrogate grid as a backend: task_index selects from a fixed task list.
class GridRolloutBackend : public RolloutBackend {
public:
    GridRolloutBackend(GridModel model, std::vector<Task> tasks,
                       RewardWeights weights, ActionBounds bounds = {});

    RolloutResult run(const RolloutJob& job) const override;
    const std::vector<Task>& tasks() const { return tasks_; }
    const GridModel& model() const { return model_; }
    const RewardWeights& weights() const { return weights_; }

private:
    GridModel model_;
    std::vector<Task> tasks_;
    RewardWeights weights_;
    ActionBounds bounds_;
};

} // namespace gridshed
