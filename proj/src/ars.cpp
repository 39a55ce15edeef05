#include "gridshed/ars.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>

#include "gridshed/errors.hpp"

namespace gridshed {

namespace {

double mean_return(std::span<const RolloutResult> slice) {
    double sum = 0.0;
    for (const RolloutResult& r : slice) sum += r.episode_return;
    return sum / static_cast<double>(slice.size());
}

bool any_failed(std::span<const RolloutResult> slice) {
    return std::any_of(slice.begin(), slice.end(),
                       [](const RolloutResult& r) { return r.failed; });
}

// Zero-violation evaluations win; within a tier, higher return wins.
bool better_eval(const EvalRecord& a, const EvalRecord& b) {
    const bool az = a.violations == 0, bz = b.violations == 0;
    if (az != bz) return az;
    return a.greedy_return > b.greedy_return;
}

std::vector<RolloutResult> greedy_rollouts(const RolloutBackend& backend,
                                           std::shared_ptr<const PolicyParams> params,
                                           std::shared_ptr<const RunningStats> stats,
                                           int num_tasks, int worker_count,
                                           std::uint64_t seed, int iteration,
                                           bool retain) {
    std::vector<RolloutJob> jobs(num_tasks);
    for (int k = 0; k < num_tasks; ++k) {
        jobs[k].iteration = iteration;
        jobs[k].direction = -1;
        jobs[k].sign = 0;
        jobs[k].task_index = k;
        jobs[k].params = params;
        jobs[k].stats = stats;
        jobs[k].rng_stream = rng_stream_id(seed, iteration, -1, 0, k);
        jobs[k].retain_trajectory = retain;
    }
    std::vector<RolloutResult> results = run_jobs(backend, jobs, worker_count);
    for (const RolloutResult& r : results)
        if (r.failed)
            throw std::runtime_error("greedy evaluation rollout failed: " + r.error);
    return results;
}

} // namespace

void validate(const ArsConfig& config) {
    if (config.alpha <= 0.0) throw ConfigError("alpha must be positive");
    if (config.num_directions < 1) throw ConfigError("num_directions must be at least 1");
    if (config.nu <= 0.0) throw ConfigError("nu must be positive");
    if (config.top_b < 1 || config.top_b > config.num_directions)
        throw ConfigError("top_b must lie in [1, num_directions]");
    if (config.rollouts_per_direction < 1)
        throw ConfigError("rollouts_per_direction must be at least 1");
    if (config.decay <= 0.0 || config.decay > 1.0)
        throw ConfigError("decay must lie in (0, 1]");
    if (config.iterations < 0) throw ConfigError("iterations must be non-negative");
    if (config.eval_every < 1) throw ConfigError("eval_every must be at least 1");
    if (config.sigma_floor <= 0.0) throw ConfigError("sigma_floor must be positive");
}

std::vector<std::vector<double>> sample_directions(int n_directions, int dim,
                                                   std::mt19937_64& rng) {
    if (n_directions < 1 || dim < 1)
        throw std::invalid_argument("direction counts and dimension must be positive");
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<std::vector<double>> dirs(n_directions);
    for (auto& d : dirs) {
        d.resize(dim);
        for (double& x : d) x = normal(rng);
    }
    return dirs;
}

TopSelection select_top(std::span<const DirectionResult> results, int b,
                        double sigma_floor) {
    if (results.empty()) throw std::invalid_argument("select_top on no directions");
    if (b < 1 || b > static_cast<int>(results.size()))
        throw std::invalid_argument("b must lie in [1, results]");

    TopSelection sel;
    sel.indices.resize(results.size());
    std::iota(sel.indices.begin(), sel.indices.end(), 0);
    std::stable_sort(sel.indices.begin(), sel.indices.end(), [&](int a, int c) {
        return results[a].score() > results[c].score();
    });
    sel.indices.resize(b);

    double sum = 0.0;
    for (int i : sel.indices) sum += results[i].reward_pos + results[i].reward_neg;
    const double mean = sum / (2.0 * b);
    double sq = 0.0;
    for (int i : sel.indices) {
        const double dp = results[i].reward_pos - mean;
        const double dn = results[i].reward_neg - mean;
        sq += dp * dp + dn * dn;
    }
    sel.sigma_b = std::sqrt(sq / (2.0 * b));
    if (sel.sigma_b < sigma_floor) sel.sigma_b = 1.0;
    return sel;
}

std::vector<double> update_weights(std::span<const double> theta,
                                   std::span<const DirectionResult> results,
                                   const TopSelection& selection,
                                   double alpha) {
    if (selection.indices.empty()) throw std::invalid_argument("empty selection");
    if (selection.sigma_b <= 0.0) throw std::invalid_argument("sigma_b must be positive");
    const double scale = alpha / (static_cast<double>(selection.indices.size()) * selection.sigma_b);
    std::vector<double> out(theta.begin(), theta.end());
    for (int i : selection.indices) {
        if (i < 0 || i >= static_cast<int>(results.size()))
            throw std::invalid_argument("selection index out of range");
        const DirectionResult& r = results[i];
        if (r.delta.size() != out.size())
            throw std::invalid_argument("direction length does not match theta");
        const double w = scale * (r.reward_pos - r.reward_neg);
        for (std::size_t k = 0; k < out.size(); ++k) out[k] += w * r.delta[k];
    }
    return out;
}

DirectionResult evaluate_direction(const RolloutBackend& backend, int num_tasks,
                                   const PolicyParams& params,
                                   std::span<const double> delta, double nu,
                                   const RunningStats& stats,
                                   std::uint64_t seed, int iteration, int direction) {
    if (num_tasks < 1) throw std::invalid_argument("num_tasks must be positive");

    DirectionResult result;
    result.direction = direction;
    result.delta.assign(delta.begin(), delta.end());

    auto stats_ref = std::make_shared<const RunningStats>(stats);
    std::vector<RolloutJob> jobs;
    jobs.reserve(2 * num_tasks);
    for (int sign : {+1, -1}) {
        auto perturbed = std::make_shared<const PolicyParams>(perturb(params, delta, nu, sign));
        for (int k = 0; k < num_tasks; ++k) {
            RolloutJob job;
            job.iteration = iteration;
            job.direction = direction;
            job.sign = sign;
            job.task_index = k;
            job.params = perturbed;
            job.stats = stats_ref;
            job.rng_stream = rng_stream_id(seed, iteration, direction, sign, k);
            jobs.push_back(std::move(job));
        }
    }

    const std::vector<RolloutResult> results = run_jobs(backend, jobs, 1);
    const std::span<const RolloutResult> all(results);
    if (any_failed(all)) {
        result.failed = true;
        return result;
    }
    result.reward_pos = mean_return(all.subspan(0, num_tasks));
    result.reward_neg = mean_return(all.subspan(num_tasks, num_tasks));
    return result;
}

std::vector<RolloutResult> evaluate_policy(const RolloutBackend& backend,
                                           const PolicyParams& params,
                                           const RunningStats& stats, int num_tasks,
                                           int worker_count, bool retain_trajectory) {
    return greedy_rollouts(backend, std::make_shared<const PolicyParams>(params),
                           std::make_shared<const RunningStats>(stats), num_tasks,
                           worker_count, 0, -1, retain_trajectory);
}

TrainResult train(const ArsConfig& config, const PolicyArch& arch,
                  int input_dim, int output_dim, const RolloutBackend& backend,
                  int num_tasks, int worker_count, const EvalCallback& on_eval) {
    validate(config);
    if (num_tasks < 1) throw ConfigError("training needs at least one task");
    if (config.rollouts_per_direction != num_tasks)
        throw ConfigError("rollouts_per_direction (" +
                          std::to_string(config.rollouts_per_direction) +
                          ") must equal the task count (" + std::to_string(num_tasks) + ")");

    const int n_dirs = config.num_directions;
    const int m = num_tasks;

    PolicyParams params = make_policy(arch, input_dim, output_dim);
    std::mt19937_64 rng(rng_stream_id(config.seed, -1, 0, 0, 0));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& x : params.theta) x = 0.01 * normal(rng);

    RunningStats stats(input_dim);
    TrainResult result{params, stats, params, stats, EvalRecord{}, TrainHistory{}};
    bool have_best = false;

    double alpha = config.alpha;
    double nu = config.nu;
    const auto started = std::chrono::steady_clock::now();

    auto run_iteration = [&](int iter) {
        const std::vector<std::vector<double>> deltas = sample_directions(
            n_dirs, static_cast<int>(params.theta.size()), rng);

        auto stats_ref = std::make_shared<const RunningStats>(stats);
        std::vector<RolloutJob> jobs;
        jobs.reserve(static_cast<std::size_t>(2) * n_dirs * m);
        for (int d = 0; d < n_dirs; ++d) {
            for (int sign : {+1, -1}) {
                auto perturbed =
                    std::make_shared<const PolicyParams>(perturb(params, deltas[d], nu, sign));
                for (int k = 0; k < m; ++k) {
                    RolloutJob job;
                    job.iteration = iter;
                    job.direction = d;
                    job.sign = sign;
                    job.task_index = k;
                    job.params = perturbed;
                    job.stats = stats_ref;
                    job.rng_stream = rng_stream_id(config.seed, iter, d, sign, k);
                    jobs.push_back(std::move(job));
                }
            }
        }
        const std::vector<RolloutResult> rollouts = run_jobs(backend, jobs, worker_count);
        const std::span<const RolloutResult> all(rollouts);

        std::vector<DirectionResult> live;
        live.reserve(n_dirs);
        for (int d = 0; d < n_dirs; ++d) {
            const auto plus = all.subspan(static_cast<std::size_t>(d) * 2 * m, m);
            const auto minus = all.subspan(static_cast<std::size_t>(d) * 2 * m + m, m);
            if (any_failed(plus) || any_failed(minus)) continue; // direction dropped
            DirectionResult dr;
            dr.direction = d;
            dr.reward_pos = mean_return(plus);
            dr.reward_neg = mean_return(minus);
            dr.delta = deltas[d];
            live.push_back(std::move(dr));
        }
        if (live.empty())
            throw std::runtime_error("all directions failed at iteration " + std::to_string(iter));

        const int b = std::min<int>(config.top_b, static_cast<int>(live.size()));
        const TopSelection sel = select_top(live, b, config.sigma_floor);
        params.theta = update_weights(params.theta, live, sel, alpha);

        // Fold every state visited this iteration, in job order.
        for (const RolloutResult& r : rollouts)
            for (const Observation& obs : r.observations) stats_update(stats, obs);
    };

    int iter = 0;
    try {
        for (iter = 1; iter <= config.iterations; ++iter) {
            const double alpha_used = alpha;
            const double nu_used = nu;
            run_iteration(iter);
            std::tie(alpha, nu) = decay_step(alpha, nu, config.decay);

            if (iter % config.eval_every == 0 || iter == config.iterations) {
                const std::vector<RolloutResult> greedy = greedy_rollouts(
                    backend, std::make_shared<const PolicyParams>(params),
                    std::make_shared<const RunningStats>(stats), m, worker_count,
                    config.seed, iter, false);
                EvalRecord record;
                record.iteration = iter;
                record.greedy_return = mean_return(greedy);
                for (const RolloutResult& r : greedy) record.violations += r.violation_steps;
                record.alpha = alpha_used;
                record.nu = nu_used;
                record.wall_seconds =
                    config.record_wall_time
                        ? std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
                              .count()
                        : 0.0;
                result.history.evals.push_back(record);

                const bool is_best = !have_best || better_eval(record, result.best_record);
                if (is_best) {
                    have_best = true;
                    result.best_record = record;
                    result.best_params = params;
                    result.best_stats = stats;
                }
                if (on_eval) on_eval(TrainSnapshot{params, stats, record, is_best, false});
            }
        }
    } catch (...) {
        if (on_eval) {
            EvalRecord record;
            record.iteration = iter;
            record.alpha = alpha;
            record.nu = nu;
            on_eval(TrainSnapshot{params, stats, record, false, true});
        }
        throw;
    }

    result.params = std::move(params);
    result.stats = std::move(stats);
    if (!have_best) {
        result.best_params = result.params;
        result.best_stats = result.stats;
    }
    return result;
}

} // namespace gridshed
