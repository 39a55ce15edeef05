#include "gridshed/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gridshed/errors.hpp"

namespace gridshed {

namespace {

using nlohmann::json;

template <typename T>
T as(const json& value, const std::string& path) {
    try {
        return value.get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config key " + path + " has the wrong type");
    }
}

std::vector<std::vector<double>> as_matrix(const json& value, const std::string& path) {
    if (!value.is_array()) throw ConfigError("config key " + path + " must be a 2d array");
    std::vector<std::vector<double>> out;
    for (const json& row : value) out.push_back(as<std::vector<double>>(row, path));
    return out;
}

void apply_grid(const json& section, GridModel& grid) {
    for (const auto& [key, value] : section.items()) {
        const std::string path = "grid." + key;
        if (key == "load_buses") grid.load_buses = as<std::vector<int>>(value, path);
        else if (key == "monitored_buses") grid.monitored_buses = as<std::vector<int>>(value, path);
        else if (key == "fault_buses") grid.fault_buses = as<std::vector<int>>(value, path);
        else if (key == "coupling") grid.coupling = as_matrix(value, path);
        else if (key == "dip_depth") grid.dip_depth = as_matrix(value, path);
        else if (key == "kappa_r") grid.dynamics.kappa_r = as<double>(value, path);
        else if (key == "kappa_l") grid.dynamics.kappa_l = as<double>(value, path);
        else if (key == "kappa_s") grid.dynamics.kappa_s = as<double>(value, path);
        else if (key == "kappa_d") grid.dynamics.kappa_d = as<double>(value, path);
        else if (key == "v_stall") grid.dynamics.v_stall = as<double>(value, path);
        else if (key == "v_rec") grid.dynamics.v_rec = as<double>(value, path);
        else if (key == "v_nom") grid.dynamics.v_nom = as<double>(value, path);
        else if (key == "dt") grid.dt_s = as<double>(value, path);
        else if (key == "action_interval") grid.action_interval_s = as<double>(value, path);
        else if (key == "horizon") grid.horizon_s = as<double>(value, path);
        else if (key == "action_epsilon") grid.action_epsilon = as<double>(value, path);
        else throw ConfigError("unknown config key: " + path);
    }
}

void apply_reward(const json& section, RewardWeights& reward) {
    for (const auto& [key, value] : section.items()) {
        const std::string path = "reward." + key;
        if (key == "c1") reward.c1 = as<double>(value, path);
        else if (key == "c2") reward.c2 = as<double>(value, path);
        else if (key == "c3") reward.c3 = as<double>(value, path);
        else if (key == "c4") reward.c4 = as<double>(value, path);
        else if (key == "terminal_penalty") reward.terminal_penalty = as<double>(value, path);
        else if (key == "barrier_margin") reward.barrier_margin = as<double>(value, path);
        else throw ConfigError("unknown config key: " + path);
    }
}

void apply_ars(const json& section, ArsConfig& ars) {
    for (const auto& [key, value] : section.items()) {
        const std::string path = "ars." + key;
        if (key == "alpha") ars.alpha = as<double>(value, path);
        else if (key == "num_directions") ars.num_directions = as<int>(value, path);
        else if (key == "nu") ars.nu = as<double>(value, path);
        else if (key == "top_b") ars.top_b = as<int>(value, path);
        else if (key == "rollouts_per_direction") ars.rollouts_per_direction = as<int>(value, path);
        else if (key == "decay") ars.decay = as<double>(value, path);
        else if (key == "iterations") ars.iterations = as<int>(value, path);
        else if (key == "eval_every") ars.eval_every = as<int>(value, path);
        else if (key == "sigma_floor") ars.sigma_floor = as<double>(value, path);
        else if (key == "record_wall_time") ars.record_wall_time = as<bool>(value, path);
        else throw ConfigError("unknown config key: " + path);
    }
}

void apply_policy(const json& section, PolicyArch& policy) {
    for (const auto& [key, value] : section.items()) {
        const std::string path = "policy." + key;
        if (key == "arch") {
            const std::string arch = as<std::string>(value, path);
            if (arch == "linear") policy.kind = PolicyKind::linear;
            else if (arch == "lstm") policy.kind = PolicyKind::lstm;
            else throw ConfigError("config key policy.arch must be \"linear\" or \"lstm\"");
        } else if (key == "hidden_size") {
            policy.hidden_size = as<int>(value, path);
        } else {
            throw ConfigError("unknown config key: " + path);
        }
    }
}

void apply_tasks(const json& section, TaskSetConfig& tasks) {
    for (const auto& [key, value] : section.items()) {
        const std::string path = "tasks." + key;
        if (key == "train_buses") tasks.train_buses = as<std::vector<int>>(value, path);
        else if (key == "train_durations") tasks.train_durations = as<std::vector<double>>(value, path);
        else if (key == "require_disjoint") tasks.require_disjoint = as<bool>(value, path);
        else if (key == "held_out") {
            if (!value.is_array()) throw ConfigError("config key " + path + " must be an array");
            tasks.held_out.clear();
            for (std::size_t i = 0; i < value.size(); ++i) {
                const std::string item_path = path + "[" + std::to_string(i) + "]";
                const json& item = value[i];
                if (!item.is_object())
                    throw ConfigError("config key " + item_path + " must be an object");
                Task task;
                for (const auto& [tkey, tvalue] : item.items()) {
                    if (tkey == "bus") task.fault_bus = as<int>(tvalue, item_path + ".bus");
                    else if (tkey == "duration")
                        task.fault_duration_s = as<double>(tvalue, item_path + ".duration");
                    else if (tkey == "start")
                        task.fault_start_s = as<double>(tvalue, item_path + ".start");
                    else throw ConfigError("unknown config key: " + item_path + "." + tkey);
                }
                tasks.held_out.push_back(task);
            }
        } else {
            throw ConfigError("unknown config key: " + path);
        }
    }
}

void apply_json(const json& root, ExperimentConfig& config) {
    if (!root.is_object()) throw ConfigError("config root must be a JSON object");
    for (const auto& [key, value] : root.items()) {
        if (key == "grid") apply_grid(value, config.grid);
        else if (key == "reward") apply_reward(value, config.reward);
        else if (key == "ars") apply_ars(value, config.ars);
        else if (key == "policy") apply_policy(value, config.policy);
        else if (key == "tasks") apply_tasks(value, config.tasks);
        else if (key == "seed") config.seed = as<std::uint64_t>(value, "seed");
        else if (key == "out_dir") config.out_dir = as<std::string>(value, "out_dir");
        else if (key == "workers") config.workers = as<int>(value, "workers");
        else throw ConfigError("unknown config key: " + key);
    }
}

json to_json(const ExperimentConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["out_dir"] = c.out_dir;
    j["workers"] = c.workers;
    j["grid"] = {
        {"load_buses", c.grid.load_buses},
        {"monitored_buses", c.grid.monitored_buses},
        {"fault_buses", c.grid.fault_buses},
        {"coupling", c.grid.coupling},
        {"dip_depth", c.grid.dip_depth},
        {"kappa_r", c.grid.dynamics.kappa_r},
        {"kappa_l", c.grid.dynamics.kappa_l},
        {"kappa_s", c.grid.dynamics.kappa_s},
        {"kappa_d", c.grid.dynamics.kappa_d},
        {"v_stall", c.grid.dynamics.v_stall},
        {"v_rec", c.grid.dynamics.v_rec},
        {"v_nom", c.grid.dynamics.v_nom},
        {"dt", c.grid.dt_s},
        {"action_interval", c.grid.action_interval_s},
        {"horizon", c.grid.horizon_s},
        {"action_epsilon", c.grid.action_epsilon},
    };
    j["reward"] = {
        {"c1", c.reward.c1}, {"c2", c.reward.c2}, {"c3", c.reward.c3}, {"c4", c.reward.c4},
        {"terminal_penalty", c.reward.terminal_penalty},
        {"barrier_margin", c.reward.barrier_margin},
    };
    j["ars"] = {
        {"alpha", c.ars.alpha},
        {"num_directions", c.ars.num_directions},
        {"nu", c.ars.nu},
        {"top_b", c.ars.top_b},
        {"rollouts_per_direction", c.ars.rollouts_per_direction},
        {"decay", c.ars.decay},
        {"iterations", c.ars.iterations},
        {"eval_every", c.ars.eval_every},
        {"sigma_floor", c.ars.sigma_floor},
        {"record_wall_time", c.ars.record_wall_time},
    };
    j["policy"] = {
        {"arch", c.policy.kind == PolicyKind::linear ? "linear" : "lstm"},
        {"hidden_size", c.policy.hidden_size},
    };
    json held = json::array();
    for (const Task& t : c.tasks.held_out)
        held.push_back({{"bus", t.fault_bus}, {"duration", t.fault_duration_s},
                        {"start", t.fault_start_s}});
    j["tasks"] = {
        {"train_buses", c.tasks.train_buses},
        {"train_durations", c.tasks.train_durations},
        {"held_out", held},
        {"require_disjoint", c.tasks.require_disjoint},
    };
    return j;
}

} // namespace

ExperimentConfig default_config() { return ExperimentConfig{}; }

ExperimentConfig parse_config(const std::string& json_text, const std::string& origin) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    ExperimentConfig config;
    apply_json(root, config);
    return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path.string());
}

void apply_env_overrides(ExperimentConfig& config) {
    // Scalar keys only; lists and matrices must come from the config file.
    static const char* kScalarKeys[] = {
        "grid.kappa_r", "grid.kappa_l", "grid.kappa_s", "grid.kappa_d",
        "grid.v_stall", "grid.v_rec", "grid.v_nom", "grid.dt",
        "grid.action_interval", "grid.horizon", "grid.action_epsilon",
        "reward.c1", "reward.c2", "reward.c3", "reward.c4",
        "reward.terminal_penalty", "reward.barrier_margin",
        "ars.alpha", "ars.num_directions", "ars.nu", "ars.top_b",
        "ars.rollouts_per_direction", "ars.decay", "ars.iterations",
        "ars.eval_every", "ars.sigma_floor", "ars.record_wall_time",
        "policy.arch", "policy.hidden_size",
        "tasks.require_disjoint",
        "seed", "out_dir", "workers",
    };
    for (const char* dotted : kScalarKeys) {
        std::string name = "GRIDSHED_";
        for (const char* p = dotted; *p; ++p)
            name += *p == '.' ? '_' : static_cast<char>(std::toupper(*p));
        const char* raw = std::getenv(name.c_str());
        if (!raw) continue;

        json value;
        try {
            value = json::parse(raw);
        } catch (const json::exception&) {
            value = std::string(raw); // bare strings need no quoting
        }
        json patch;
        const std::string key = dotted;
        const auto dot = key.find('.');
        if (dot == std::string::npos) patch[key] = value;
        else patch[key.substr(0, dot)][key.substr(dot + 1)] = value;
        try {
            apply_json(patch, config);
        } catch (const ConfigError& e) {
            throw ConfigError(std::string("environment override ") + name + ": " + e.what());
        }
    }
}

std::string config_to_json_text(const ExperimentConfig& config, int indent) {
    return to_json(config).dump(indent);
}

std::vector<Task> training_tasks(const ExperimentConfig& config) {
    return make_task_set(config.grid, config.tasks.train_buses, config.tasks.train_durations);
}

void validate(const ExperimentConfig& config) {
    validate(config.grid);
    validate(config.reward);
    validate(config.ars);
    if (config.policy.kind == PolicyKind::lstm && config.policy.hidden_size < 1)
        throw ConfigError("policy.hidden_size must be positive for lstm policies");
    if (config.workers < 0) throw ConfigError("workers must be non-negative");

    const std::vector<Task> tasks = training_tasks(config);
    if (tasks.empty()) throw ConfigError("training task set is empty");
    if (config.ars.rollouts_per_direction != static_cast<int>(tasks.size()))
        throw ConfigError("ars.rollouts_per_direction (" +
                          std::to_string(config.ars.rollouts_per_direction) +
                          ") must equal the training task count (" +
                          std::to_string(tasks.size()) + ")");

    for (const Task& held : config.tasks.held_out) {
        try {
            (void)reset(config.grid, held, 0);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("held-out task invalid: ") + e.what());
        }
        if (!config.tasks.require_disjoint) continue;
        for (const Task& train : tasks)
            if (train.fault_bus == held.fault_bus &&
                train.fault_duration_s == held.fault_duration_s &&
                train.fault_start_s == held.fault_start_s)
                throw ConfigError("held-out task bus " + std::to_string(held.fault_bus) +
                                  " duplicates a training task");
    }
}

} // namespace gridshed
