#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "gridshed/cli.hpp"
#include "gridshed/config.hpp"
#include "gridshed/errors.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Safe load-shedding policy search on a surrogate transmission grid"};
    app.set_version_flag("--version", std::string("gridshed ") + gridshed::kToolVersion);
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    app.add_option("--config", config_path, "JSON config file (defaults apply when omitted)");
    std::uint64_t seed = 0;
    CLI::Option* seed_opt = app.add_option("--seed", seed, "experiment seed");
    int workers = 0;
    CLI::Option* workers_opt =
        app.add_option("--workers", workers, "worker threads (0 = hardware concurrency)");
    std::string out_dir;
    CLI::Option* out_opt = app.add_option("--out", out_dir, "output directory");

    static const std::string kTaskHelp =
        "task selection: train, heldout, all, or bus=<id>,dur=<seconds>";

    CLI::App* train_cmd = app.add_subcommand("train", "train a policy on the task set");

    std::string eval_ckpt;
    std::string eval_task = "all";
    CLI::App* eval_cmd = app.add_subcommand("eval", "run greedy rollouts of a checkpoint");
    eval_cmd->add_option("checkpoint", eval_ckpt, "checkpoint file")->required();
    eval_cmd->add_option("--task", eval_task, kTaskHelp);

    std::string base_task = "all";
    CLI::App* base_cmd = app.add_subcommand("baseline", "run rollouts with no control at all");
    base_cmd->add_option("--task", base_task, kTaskHelp);

    std::string cmp_a, cmp_b;
    std::string cmp_task = "all";
    CLI::App* cmp_cmd = app.add_subcommand("compare", "evaluate two checkpoints side by side");
    cmp_cmd->add_option("checkpoint_a", cmp_a, "first checkpoint")->required();
    cmp_cmd->add_option("checkpoint_b", cmp_b, "second checkpoint")->required();
    cmp_cmd->add_option("--task", cmp_task, kTaskHelp);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        gridshed::ExperimentConfig config = config_path.empty()
                                                ? gridshed::default_config()
                                                : gridshed::load_config(config_path);
        gridshed::apply_env_overrides(config);
        if (seed_opt->count() > 0) config.seed = seed;
        if (workers_opt->count() > 0) config.workers = workers;
        if (out_opt->count() > 0) config.out_dir = out_dir;

        if (train_cmd->parsed()) return gridshed::cmd_train(config);
        if (eval_cmd->parsed()) return gridshed::cmd_eval(config, eval_ckpt, eval_task);
        if (base_cmd->parsed()) return gridshed::cmd_baseline(config, base_task);
        if (cmp_cmd->parsed()) return gridshed::cmd_compare(config, cmp_a, cmp_b, cmp_task);
        return gridshed::kExitRuntimeError;
    } catch (const gridshed::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return gridshed::kExitConfigError;
    } catch (const gridshed::CheckpointError& e) {
        std::cerr << "checkpoint error: " << e.what() << "\n";
        return gridshed::kExitCheckpointError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return gridshed::kExitRuntimeError;
    }
}
