#include "gridshed/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "gridshed/errors.hpp"

namespace gridshed {

namespace {

constexpr double kTimeEps = 1e-9;

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open output file: " + path.string());
    return out;
}

} // namespace

std::string format_double(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", value);
    return buf;
}

std::string task_slug(const Task& task) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "bus%d_dur%g", task.fault_bus, task.fault_duration_s);
    return buf;
}

std::string trajectory_csv_header(const GridModel& model) {
    std::ostringstream out;
    out << "t";
    for (int bus : model.monitored_buses) out << ",V_bus" << bus;
    for (int bus : model.load_buses) out << ",L_bus" << bus;
    for (int bus : model.load_buses) out << ",a_bus" << bus;
    out << ",r,B,R,threshold";
    return out.str();
}

void write_trajectory_csv(const std::filesystem::path& path, const GridModel& model,
                          const SafetyEnvelope& envelope, const RolloutResult& result,
                          const RewardWeights& weights) {
    if (result.trajectory.size() != result.actions.size() ||
        result.trajectory.size() != result.rewards.size())
        throw std::invalid_argument("trajectory csv needs a fully retained rollout");

    std::ofstream out = open_out(path);
    out << trajectory_csv_header(model) << "\n";

    // Load fractions are reconstructed from the shed amounts; every episode
    // starts fully loaded.
    std::vector<double> fractions(model.load_buses.size(), 1.0);
    for (std::size_t s = 0; s < result.trajectory.size(); ++s) {
        const StepInfo& info = result.trajectory[s];
        const RewardBreakdown& rb = result.rewards[s];
        for (std::size_t j = 0; j < fractions.size(); ++j)
            fractions[j] -= info.shed_amounts[j];

        out << format_double(info.t_s);
        for (double v : info.voltages) out << ',' << format_double(v);
        for (double f : fractions) out << ',' << format_double(f);
        for (double a : result.actions[s]) out << ',' << format_double(a);
        const double base = rb.total + weights.c4 * rb.barrier_term;
        out << ',' << format_double(base);
        out << ',' << format_double(rb.barrier_term);
        out << ',' << format_double(rb.total);
        const bool post = info.t_s >= info.t_clear_s - kTimeEps;
        out << ','
            << format_double(post ? envelope_threshold(envelope, info.t_s, info.t_clear_s)
                                  : std::nan(""));
        out << "\n";
    }
    if (!out) throw std::runtime_error("short write to " + path.string());
}

TaskEval summarize_task(const SafetyEnvelope& envelope, const Task& task,
                        const RolloutResult& result) {
    if (result.trajectory.empty() && result.steps > 0)
        throw std::invalid_argument("task summary needs a fully retained rollout");

    TaskEval eval;
    eval.task = task;
    eval.episode_return = result.episode_return;
    eval.terminated_early = result.terminated_early;
    for (const StepInfo& info : result.trajectory)
        for (double shed : info.shed_amounts) eval.total_shed += shed;

    const ViolationReport report = check_violation(envelope, result.trajectory);
    eval.violation_steps = report.total_violation_steps;
    eval.max_deficit = report.max_deficit;

    // Recovered means the tail of the episode is clean: no violations once
    // the final (tightest) threshold is in force, and no early termination.
    const double final_offset = envelope.breakpoints.back().first;
    bool tail_clean = true;
    for (const auto& bus_samples : report.per_bus)
        for (const ViolationSample& sample : bus_samples)
            if (sample.t_s - result.trajectory.front().t_clear_s >= final_offset - kTimeEps)
                tail_clean = false;
    eval.recovered = tail_clean && !result.terminated_early;
    return eval;
}

EvalSummary summarize(const SafetyEnvelope& envelope, std::span<const Task> tasks,
                      std::span<const RolloutResult> results) {
    if (tasks.size() != results.size())
        throw std::invalid_argument("task and result counts differ");
    EvalSummary summary;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        summary.tasks.push_back(summarize_task(envelope, tasks[i], results[i]));
        if (summary.tasks.back().recovered) ++summary.passed;
    }
    return summary;
}

void write_eval_json(const std::filesystem::path& path, const EvalSummary& summary) {
    nlohmann::json j;
    j["tasks"] = nlohmann::json::array();
    for (const TaskEval& t : summary.tasks) {
        j["tasks"].push_back({
            {"bus", t.task.fault_bus},
            {"duration", t.task.fault_duration_s},
            {"return", t.episode_return},
            {"total_shed", t.total_shed},
            {"violation_steps", t.violation_steps},
            {"max_deficit", t.max_deficit},
            {"terminated_early", t.terminated_early},
            {"recovered", t.recovered},
        });
    }
    j["passed"] = summary.passed;
    j["total"] = summary.tasks.size();
    std::ofstream out = open_out(path);
    out << j.dump(2) << "\n";
    if (!out) throw std::runtime_error("short write to " + path.string());
}

std::string format_eval_table(const EvalSummary& summary) {
    std::ostringstream out;
    char line[160];
    std::snprintf(line, sizeof(line), "%-16s %12s %8s %6s %8s %6s %10s\n",
                  "task", "return", "shed", "viol", "maxdef", "term", "recovered");
    out << line;
    for (const TaskEval& t : summary.tasks) {
        std::snprintf(line, sizeof(line), "%-16s %12.3f %8.3f %6d %8.4f %6s %10s\n",
                      task_slug(t.task).c_str(), t.episode_return, t.total_shed,
                      t.violation_steps, t.max_deficit,
                      t.terminated_early ? "yes" : "no", t.recovered ? "yes" : "no");
        out << line;
    }
    std::snprintf(line, sizeof(line), "recovered on %d of %zu tasks\n", summary.passed,
                  summary.tasks.size());
    out << line;
    return out.str();
}

std::string history_csv_row(const EvalRecord& record) {
    std::ostringstream out;
    out << record.iteration << ',' << format_double(record.greedy_return) << ','
        << record.violations << ',' << format_double(record.alpha) << ','
        << format_double(record.nu) << ',' << format_double(record.wall_seconds);
    return out.str();
}

} // namespace gridshed
