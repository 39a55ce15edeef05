#include "gridshed/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include <json.hpp>

#include "gridshed/ars.hpp"
#include "gridshed/checkpoint.hpp"
#include "gridshed/errors.hpp"
#include "gridshed/parallel.hpp"
#include "gridshed/report.hpp"

namespace gridshed {

namespace {

namespace fs = std::filesystem;

int observation_dim(const GridModel& model) {
    return static_cast<int>(model.monitored_buses.size() + model.load_buses.size());
}

void write_run_metadata(const fs::path& dir, const std::string& command,
                        const ExperimentConfig& config) {
    nlohmann::json meta;
    meta["tool"] = "gridshed";
    meta["version"] = kToolVersion;
    meta["command"] = command;
    meta["config"] = nlohmann::json::parse(config_to_json_text(config));
    std::ofstream out(dir / "run_metadata.json", std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + (dir / "run_metadata.json").string());
    out << meta.dump(2) << "\n";
}

Checkpoint load_matching_checkpoint(const fs::path& path, const ExperimentConfig& config) {
    Checkpoint ckpt = load_checkpoint(path);
    const int in = observation_dim(config.grid);
    const int out = static_cast<int>(config.grid.load_buses.size());
    if (ckpt.params.input_dim != in || ckpt.params.output_dim != out)
        throw ConfigError("checkpoint " + path.string() + " expects " +
                          std::to_string(ckpt.params.input_dim) + " inputs / " +
                          std::to_string(ckpt.params.output_dim) +
                          " outputs but the configured grid has " + std::to_string(in) +
                          " / " + std::to_string(out));
    return ckpt;
}

// Greedy rollouts with full retention over an explicit task list.
std::vector<RolloutResult> eval_rollouts(const ExperimentConfig& config,
                                         const std::vector<Task>& tasks,
                                         const Checkpoint& ckpt) {
    GridRolloutBackend backend(config.grid, tasks, config.reward);
    return evaluate_policy(backend, ckpt.params, ckpt.stats,
                           static_cast<int>(tasks.size()), config.workers, true);
}

void write_task_reports(const fs::path& dir, const std::string& prefix,
                        const ExperimentConfig& config, const std::vector<Task>& tasks,
                        const std::vector<RolloutResult>& results,
                        const EvalSummary& summary) {
    const SafetyEnvelope envelope;
    for (std::size_t i = 0; i < tasks.size(); ++i)
        write_trajectory_csv(dir / (prefix + "traj_" + task_slug(tasks[i]) + ".csv"),
                             config.grid, envelope, results[i], config.reward);
    write_eval_json(dir / (prefix + "eval.json"), summary);
}

} // namespace

std::vector<Task> resolve_task_spec(const ExperimentConfig& config, const std::string& spec) {
    if (spec == "train") return training_tasks(config);
    if (spec == "heldout") {
        if (config.tasks.held_out.empty())
            throw ConfigError("task spec 'heldout' selected but no held-out tasks configured");
        return config.tasks.held_out;
    }
    if (spec == "all") {
        std::vector<Task> tasks = training_tasks(config);
        tasks.insert(tasks.end(), config.tasks.held_out.begin(), config.tasks.held_out.end());
        return tasks;
    }
    int bus = 0;
    double dur = 0.0;
    if (std::sscanf(spec.c_str(), "bus=%d,dur=%lf", &bus, &dur) != 2)
        throw ConfigError("bad task spec '" + spec +
                          "' (expected train, heldout, all, or bus=<id>,dur=<seconds>)");
    Task task;
    task.fault_bus = bus;
    task.fault_duration_s = dur;
    try {
        (void)reset(config.grid, task, 0);
    } catch (const std::invalid_argument& e) {
        throw ConfigError("bad task spec '" + spec + "': " + e.what());
    }
    return {task};
}

int cmd_train(const ExperimentConfig& config) {
    validate(config);
    const fs::path dir(config.out_dir);
    fs::create_directories(dir);
    write_run_metadata(dir, "train", config);

    const std::vector<Task> tasks = training_tasks(config);
    GridRolloutBackend backend(config.grid, tasks, config.reward);

    ArsConfig ars = config.ars;
    ars.seed = config.seed;

    std::ofstream history(dir / "history.csv", std::ios::trunc);
    if (!history) throw std::runtime_error("cannot open " + (dir / "history.csv").string());
    history << kHistoryHeader << "\n" << std::flush;

    const auto on_eval = [&](const TrainSnapshot& snapshot) {
        if (!snapshot.aborted) history << history_csv_row(snapshot.record) << "\n" << std::flush;
        save_checkpoint(dir / "checkpoint_latest.bin", {snapshot.params, snapshot.stats});
        if (snapshot.is_best && !snapshot.aborted)
            save_checkpoint(dir / "checkpoint_best.bin", {snapshot.params, snapshot.stats});
    };

    const int in = observation_dim(config.grid);
    const int out = static_cast<int>(config.grid.load_buses.size());
    const TrainResult result = train(ars, config.policy, in, out, backend,
                                     static_cast<int>(tasks.size()), config.workers, on_eval);

    save_checkpoint(dir / "checkpoint_latest.bin", {result.params, result.stats});
    save_checkpoint(dir / "checkpoint_best.bin", {result.best_params, result.best_stats});

    std::cout << "trained " << ars.iterations << " iterations on " << tasks.size()
              << " tasks\n";
    std::cout << "best greedy eval: return " << format_double(result.best_record.greedy_return)
              << ", " << result.best_record.violations << " violation steps (iteration "
              << result.best_record.iteration << ")\n";
    std::cout << "outputs in " << dir.string() << "\n";
    return kExitOk;
}

int cmd_eval(const ExperimentConfig& config, const fs::path& checkpoint,
             const std::string& task_spec) {
    validate(config);
    const fs::path dir(config.out_dir);
    fs::create_directories(dir);

    const Checkpoint ckpt = load_matching_checkpoint(checkpoint, config);
    const std::vector<Task> tasks = resolve_task_spec(config, task_spec);
    const std::vector<RolloutResult> results = eval_rollouts(config, tasks, ckpt);

    const SafetyEnvelope envelope;
    const EvalSummary summary = summarize(envelope, tasks, results);
    write_task_reports(dir, "", config, tasks, results, summary);
    std::cout << format_eval_table(summary);
    return kExitOk;
}

int cmd_baseline(const ExperimentConfig& config, const std::string& task_spec) {
    validate(config);
    const fs::path dir(config.out_dir);
    fs::create_directories(dir);

    const std::vector<Task> tasks = resolve_task_spec(config, task_spec);
    const std::size_t n_loads = config.grid.load_buses.size();
    const ActionFn no_control = [n_loads](double, const Observation&) {
        return std::vector<double>(n_loads, 0.0);
    };

    std::vector<RolloutResult> results;
    results.reserve(tasks.size());
    for (const Task& task : tasks)
        results.push_back(scripted_rollout(config.grid, task, config.reward, no_control, true));

    const SafetyEnvelope envelope;
    const EvalSummary summary = summarize(envelope, tasks, results);
    write_task_reports(dir, "baseline_", config, tasks, results, summary);
    std::cout << format_eval_table(summary);
    return kExitOk;
}

int cmd_compare(const ExperimentConfig& config, const fs::path& checkpoint_a,
                const fs::path& checkpoint_b, const std::string& task_spec) {
    validate(config);
    const fs::path dir(config.out_dir);
    fs::create_directories(dir);

    const Checkpoint ckpt_a = load_matching_checkpoint(checkpoint_a, config);
    const Checkpoint ckpt_b = load_matching_checkpoint(checkpoint_b, config);
    const std::vector<Task> tasks = resolve_task_spec(config, task_spec);

    const SafetyEnvelope envelope;
    const EvalSummary summary_a =
        summarize(envelope, tasks, eval_rollouts(config, tasks, ckpt_a));
    const EvalSummary summary_b =
        summarize(envelope, tasks, eval_rollouts(config, tasks, ckpt_b));

    std::ofstream out(dir / "compare.csv", std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + (dir / "compare.csv").string());
    out << "task,return_a,return_b,violations_a,violations_b,shed_a,shed_b,safer\n";

    char line[160];
    std::snprintf(line, sizeof(line), "%-16s %12s %12s %8s %8s %8s\n", "task", "return_a",
                  "return_b", "viol_a", "viol_b", "safer");
    std::cout << line;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const TaskEval& a = summary_a.tasks[i];
        const TaskEval& b = summary_b.tasks[i];
        const char* safer = a.violation_steps < b.violation_steps   ? "a"
                            : b.violation_steps < a.violation_steps ? "b"
                                                                    : "tie";
        out << task_slug(tasks[i]) << ',' << format_double(a.episode_return) << ','
            << format_double(b.episode_return) << ',' << a.violation_steps << ','
            << b.violation_steps << ',' << format_double(a.total_shed) << ','
            << format_double(b.total_shed) << ',' << safer << "\n";
        std::snprintf(line, sizeof(line), "%-16s %12.3f %12.3f %8d %8d %8s\n",
                      task_slug(tasks[i]).c_str(), a.episode_return, b.episode_return,
                      a.violation_steps, b.violation_steps, safer);
        std::cout << line;
    }
    if (!out) throw std::runtime_error("short write to " + (dir / "compare.csv").string());
    return kExitOk;
}

} // namespace gridshed
