#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gridshed/ars.hpp"
#include "gridshed/gridsim.hpp"
#include "gridshed/parallel.hpp"

namespace gridshed {

// Per-task evaluation summary.
struct TaskEval {
    Task task;
    double episode_return = 0.0;
    double total_shed = 0.0;     // p.u. over the episode
    int violation_steps = 0;
    double max_deficit = 0.0;
    bool terminated_early = false; // recovery-failure termination
    // Back inside the envelope for good: no violations at offsets past the
    // last breakpoint and no early termination.
    bool recovered = false;
};

struct EvalSummary {
    std::vector<TaskEval> tasks;
    int passed = 0; // tasks with recovered set
};

// "%.10g"; fixed formatting keeps identical runs byte-identical.
std::string format_double(double value);

// t, per-bus voltages, per-bus load fractions, per-bus actions, step reward,
// barrier, combined reward, envelope threshold (nan before clearance).
// Column names carry the bus ids, e.g. V_bus4, L_bus7, a_bus18.
std::string trajectory_csv_header(const GridModel& model);

// One row per action interval.  The rollout must have been run with full
// retention.
void write_trajectory_csv(const std::filesystem::path& path, const GridModel& model,
                          const SafetyEnvelope& envelope, const RolloutResult& result,
                          const RewardWeights& weights);

TaskEval summarize_task(const SafetyEnvelope& envelope, const Task& task,
                        const RolloutResult& result);

EvalSummary summarize(const SafetyEnvelope& envelope, std::span<const Task> tasks,
                      std::span<const RolloutResult> results);

void write_eval_json(const std::filesystem::path& path, const EvalSummary& summary);

std::string format_eval_table(const EvalSummary& summary);

inline constexpr const char* kHistoryHeader =
    "iteration,greedy_return,violations,alpha,nu,wall_seconds";

std::string history_csv_row(const EvalRecord& record);

// File name stem for a task, e.g. "bus4_dur0.15".
std::string task_slug(const Task& task);

} // namespace gridshed
