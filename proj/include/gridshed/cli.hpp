#pragma once

#include <filesystem>
#include <string>

#include "gridshed/config.hpp"

namespace gridshed {

inline constexpr const char* kToolVersion = "0.1.0";

// Exit codes the command-line front end maps exceptions to.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;   // ConfigError
inline constexpr int kExitCheckpointError = 3; // CheckpointError
inline constexpr int kExitRuntimeError = 4;  // anything else

// Task selector: "train", "heldout", "all", or "bus=<id>,dur=<seconds>".
std::vector<Task> resolve_task_spec(const ExperimentConfig& config, const std::string& spec);

// Trains on the configured task set.  Writes into config.out_dir:
//   run_metadata.json, history.csv (appended per evaluation),
//   checkpoint_latest.bin (every evaluation and on abort),
//   checkpoint_best.bin (best greedy eval, zero-violation preferred).
int cmd_train(const ExperimentConfig& config);

// Greedy rollouts of a checkpoint over the selected tasks.  Writes
// traj_<task>.csv per task plus eval.json, prints a summary table.
int cmd_eval(const ExperimentConfig& config, const std::filesystem::path& checkpoint,
             const std::string& task_spec);

// Zero-action rollouts (no control at all) over the selected tasks; same
// outputs as cmd_eval with baseline_ file prefixes.
int cmd_baseline(const ExperimentConfig& config, const std::string& task_spec);

// Evaluates two checkpoints side by side on the selected tasks; writes
// compare.csv and prints a table flagging the safer policy per task.
int cmd_compare(const ExperimentConfig& config, const std::filesystem::path& checkpoint_a,
                const std::filesystem::path& checkpoint_b, const std::string& task_spec);

} // namespace gridshed
