#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gridshed/ars.hpp"
#include "gridshed/gridsim.hpp"
#include "gridshed/policy.hpp"
#include "gridshed/reward.hpp"

namespace gridshed {

struct TaskSetConfig {
    std::vector<int> train_buses{4, 15, 21};
    std::vector<double> train_durations{0.0, 0.15, 0.28};
    std::vector<Task> held_out{Task{7, 1.0, 0.15}};
    bool require_disjoint = true; // held-out tasks may not appear in training
};

struct ExperimentConfig {
    GridModel grid = default_grid_model();
    RewardWeights reward;
    ArsConfig ars;
    PolicyArch policy;
    TaskSetConfig tasks;
    std::uint64_t seed = 0;
    std::string out_dir = "runs/out";
    int workers = 0; // 0 = hardware concurrency
};

// Built-in defaults; validates clean.
ExperimentConfig default_config();

// JSON object with any subset of the sections/keys of default_config();
// unspecified keys keep their defaults.  Unknown keys are an error that
// names the offending key.  Throws ConfigError with the origin in the message.
ExperimentConfig parse_config(const std::string& json_text, const std::string& origin);

// parse_config over the file contents.
ExperimentConfig load_config(const std::filesystem::path& path);

// Environment overrides: GRIDSHED_<SECTION>_<KEY> (e.g. GRIDSHED_ARS_ALPHA,
// GRIDSHED_REWARD_C4, GRIDSHED_POLICY_ARCH) and top-level GRIDSHED_SEED /
// GRIDSHED_OUT_DIR / GRIDSHED_WORKERS.  Values are parsed as JSON scalars,
// bare strings as a fallback.  Scalar keys only.
void apply_env_overrides(ExperimentConfig& config);

// Full round-trippable JSON dump of the effective config.
std::string config_to_json_text(const ExperimentConfig& config, int indent = 2);

// Cross-checks the whole config: section validators, task-set construction,
// rollouts_per_direction == task count, held-out disjointness.
void validate(const ExperimentConfig& config);

// Training tasks from the task-set section, bus-major.
std::vector<Task> training_tasks(const ExperimentConfig& config);

} // namespace gridshed
