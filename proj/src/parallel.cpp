#include "gridshed/parallel.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>
#include <utility>

namespace gridshed {

namespace {

constexpr double kTimeEps = 1e-9;

const SafetyEnvelope kEnvelope{};

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t h, std::uint64_t v) { return splitmix64(h ^ (v + 0x9E3779B97F4A7C15ull)); }

// Counts (bus, step) envelope violations the same way check_violation does,
// so per-rollout tallies and report totals always agree.
int violations_in_step(const StepInfo& info) {
    if (info.t_s < info.t_clear_s - kTimeEps) return 0;
    const double threshold = envelope_threshold(kEnvelope, info.t_s, info.t_clear_s);
    int n = 0;
    for (double v : info.voltages)
        if (v < threshold) ++n;
    return n;
}

template <typename ActFn>
RolloutResult run_episode(const GridModel& model, const Task& task,
                          const RewardWeights& weights, std::uint64_t seed,
                          bool retain, ActFn&& act_fn) {
    RolloutResult result;
    auto [state, obs] = reset(model, task, seed);
    while (!state.terminated) {
        result.observations.push_back(obs);
        std::vector<double> action = act_fn(state.t_s, obs);
        StepResult sr = step(model, state, action);
        const RewardBreakdown breakdown = combined_reward(sr.info, weights);
        result.episode_return += breakdown.total;
        result.violation_steps += violations_in_step(sr.info);
        if (breakdown.terminal_term != 0.0) result.terminated_early = true;
        ++result.steps;
        if (retain) {
            result.trajectory.push_back(sr.info);
            result.rewards.push_back(breakdown);
            result.actions.push_back(std::move(action));
        }
        obs = std::move(sr.obs);
    }
    return result;
}

} // namespace

std::uint64_t rng_stream_id(std::uint64_t seed, int iteration, int direction,
                            int sign, int task_index) {
    std::uint64_t h = splitmix64(seed);
    h = mix(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(iteration)));
    h = mix(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(direction)));
    h = mix(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(sign)));
    h = mix(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(task_index)));
    return h;
}

RolloutResult rollout(const GridModel& model, const Task& task,
                      const PolicyParams& params, const RunningStats& stats,
                      const RewardWeights& weights, const ActionBounds& bounds,
                      std::uint64_t seed, bool retain_trajectory) {
    HiddenState hidden = initial_hidden(params);
    return run_episode(model, task, weights, seed, retain_trajectory,
                       [&](double, const Observation& obs) {
                           const std::vector<double> norm = normalize(obs, stats);
                           const std::vector<double> raw = policy_forward(params, norm, hidden);
                           return squash_action(raw, ActionBounds{bounds.lo, bounds.hi});
                       });
}

RolloutResult scripted_rollout(const GridModel& model, const Task& task,
                               const RewardWeights& weights, const ActionFn& act,
                               bool retain_trajectory) {
    return run_episode(model, task, weights, 0, retain_trajectory,
                       [&](double t_s, const Observation& obs) { return act(t_s, obs); });
}

GridRolloutBackend::GridRolloutBackend(GridModel model, std::vector<Task> tasks,
                                       RewardWeights weights, ActionBounds bounds)
    : model_(std::move(model)), tasks_(std::move(tasks)), weights_(weights), bounds_(bounds) {}

RolloutResult GridRolloutBackend::run(const RolloutJob& job) const {
    if (job.task_index < 0 || job.task_index >= static_cast<int>(tasks_.size()))
        throw std::invalid_argument("job task index out of range");
    if (!job.params || !job.stats)
        throw std::invalid_argument("job without parameter or stats snapshot");
    RolloutResult result = rollout(model_, tasks_[job.task_index], *job.params, *job.stats,
                                   weights_, bounds_, job.rng_stream, job.retain_trajectory);
    result.iteration = job.iteration;
    result.direction = job.direction;
    result.sign = job.sign;
    result.task_index = job.task_index;
    return result;
}

std::vector<RolloutResult> run_jobs(const RolloutBackend& backend,
                                    std::span<const RolloutJob> jobs,
                                    int worker_count) {
    std::vector<RolloutResult> results(jobs.size());
    if (jobs.empty()) return results;

    auto run_one = [&](std::size_t i) {
        try {
            results[i] = backend.run(jobs[i]);
        } catch (const std::exception& e) {
            RolloutResult failed;
            failed.iteration = jobs[i].iteration;
            failed.direction = jobs[i].direction;
            failed.sign = jobs[i].sign;
            failed.task_index = jobs[i].task_index;
            failed.failed = true;
            failed.error = e.what();
            results[i] = std::move(failed);
        }
    };

    if (worker_count <= 0)
        worker_count = static_cast<int>(std::thread::hardware_concurrency());
    if (worker_count < 1) worker_count = 1;
    const int workers = std::min<int>(worker_count, static_cast<int>(jobs.size()));

    if (workers == 1) {
        for (std::size_t i = 0; i < jobs.size(); ++i) run_one(i);
        return results;
    }

    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < jobs.size(); i = next.fetch_add(1))
                run_one(i);
        });
    for (std::thread& t : pool) t.join();
    return results;
}

} // namespace gridshed
