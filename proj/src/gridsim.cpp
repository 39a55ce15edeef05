#include "gridshed/gridsim.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

#include "gridshed/errors.hpp"

namespace gridshed {

namespace {

constexpr double kTimeEps = 1e-9;

// Graph distances over the 39-bus branch list, default bus sets only.
// Rows follow fault_buses {4, 7, 15, 21}, columns monitored_buses {4, 7, 8, 18}.
constexpr int kFaultDist[4][4] = {
    {0, 3, 2, 2},
    {3, 0, 1, 5},
    {2, 5, 4, 3},
    {4, 7, 6, 3},
};

// Between monitored buses, rows and columns both {4, 7, 8, 18}.
constexpr int kMonitoredDist[4][4] = {
    {0, 3, 2, 2},
    {3, 0, 1, 5},
    {2, 1, 0, 4},
    {2, 5, 4, 0},
};

constexpr double kCouplingScale = 0.5;
constexpr double kDipBase = 0.70;  // deepest during-fault drop, p.u.
constexpr double kDipDecay = 0.18; // per hop of graph distance

const SafetyEnvelope kDefaultEnvelope{};

int index_of(const std::vector<int>& buses, int bus) {
    auto it = std::find(buses.begin(), buses.end(), bus);
    return it == buses.end() ? -1 : static_cast<int>(it - buses.begin());
}

bool has_duplicates(const std::vector<int>& buses) {
    for (std::size_t i = 0; i < buses.size(); ++i)
        for (std::size_t j = i + 1; j < buses.size(); ++j)
            if (buses[i] == buses[j]) return true;
    return false;
}

void check_task(const GridModel& model, const Task& task) {
    if (index_of(model.fault_buses, task.fault_bus) < 0)
        throw std::invalid_argument("task fault bus " + std::to_string(task.fault_bus) +
                                    " is not a fault bus of the model");
    if (task.fault_duration_s < 0.0)
        throw std::invalid_argument("negative fault duration");
    if (task.fault_start_s < 0.0)
        throw std::invalid_argument("negative fault start");
    if (task.fault_start_s + task.fault_duration_s >= model.horizon_s)
        throw std::invalid_argument("fault does not clear before the horizon");
}

int substeps_per_action(const GridModel& model) {
    return static_cast<int>(std::llround(model.action_interval_s / model.dt_s));
}

} // namespace

GridModel default_grid_model() {
    GridModel model;
    const std::size_t nm = model.monitored_buses.size();
    const std::size_t nf = model.fault_buses.size();
    model.coupling.assign(nm, std::vector<double>(nm, 0.0));
    for (std::size_t i = 0; i < nm; ++i)
        for (std::size_t j = 0; j < nm; ++j)
            if (i != j) model.coupling[i][j] = kCouplingScale / kMonitoredDist[i][j];
    model.dip_depth.assign(nf, std::vector<double>(nm, 0.0));
    for (std::size_t f = 0; f < nf; ++f)
        for (std::size_t i = 0; i < nm; ++i)
            model.dip_depth[f][i] = kDipBase / (1.0 + kDipDecay * kFaultDist[f][i]);
    return model;
}

void validate(const GridModel& model) {
    if (model.monitored_buses.empty()) throw ConfigError("no monitored buses");
    if (model.load_buses.empty()) throw ConfigError("no load buses");
    if (model.fault_buses.empty()) throw ConfigError("no fault buses");
    if (has_duplicates(model.monitored_buses)) throw ConfigError("duplicate monitored bus");
    if (has_duplicates(model.load_buses)) throw ConfigError("duplicate load bus");
    if (has_duplicates(model.fault_buses)) throw ConfigError("duplicate fault bus");
    for (int bus : model.load_buses)
        if (index_of(model.monitored_buses, bus) < 0)
            throw ConfigError("load bus " + std::to_string(bus) + " is not monitored");

    const std::size_t nm = model.monitored_buses.size();
    if (model.coupling.size() != nm)
        throw ConfigError("coupling must be square over the monitored buses");
    for (std::size_t i = 0; i < nm; ++i) {
        if (model.coupling[i].size() != nm)
            throw ConfigError("coupling must be square over the monitored buses");
        if (model.coupling[i][i] != 0.0)
            throw ConfigError("coupling diagonal must be zero");
        for (std::size_t j = 0; j < nm; ++j) {
            if (model.coupling[i][j] < 0.0) throw ConfigError("coupling must be non-negative");
            if (model.coupling[i][j] != model.coupling[j][i])
                throw ConfigError("coupling must be symmetric");
        }
    }

    if (model.dip_depth.size() != model.fault_buses.size())
        throw ConfigError("dip_depth needs one row per fault bus");
    for (const auto& row : model.dip_depth) {
        if (row.size() != nm) throw ConfigError("dip_depth needs one column per monitored bus");
        for (double d : row)
            if (d < 0.0 || d >= 1.0) throw ConfigError("dip_depth entries must lie in [0, 1)");
    }

    const GridDynamics& dyn = model.dynamics;
    if (dyn.kappa_r <= 0.0 || dyn.kappa_l < 0.0 || dyn.kappa_s < 0.0 || dyn.kappa_d < 0.0)
        throw ConfigError("dynamics rates must be positive (kappa_r) or non-negative");
    if (!(dyn.v_stall < dyn.v_rec && dyn.v_rec <= dyn.v_nom))
        throw ConfigError("need v_stall < v_rec <= v_nom");
    if (dyn.v_nom <= 0.0) throw ConfigError("v_nom must be positive");

    if (model.dt_s <= 0.0) throw ConfigError("dt must be positive");
    const double ratio = model.action_interval_s / model.dt_s;
    if (model.action_interval_s <= 0.0 || std::abs(ratio - std::llround(ratio)) > 1e-6)
        throw ConfigError("action_interval must be a positive multiple of dt");
    if (model.horizon_s < model.action_interval_s)
        throw ConfigError("horizon shorter than one action interval");
    if (model.action_epsilon < 0.0) throw ConfigError("action_epsilon must be non-negative");
}

std::vector<Task> make_task_set(const GridModel& model,
                                std::span<const int> buses,
                                std::span<const double> durations) {
    std::vector<Task> tasks;
    tasks.reserve(buses.size() * durations.size());
    for (int bus : buses) {
        if (index_of(model.fault_buses, bus) < 0)
            throw ConfigError("unknown fault bus " + std::to_string(bus) + " in task set");
        for (double dur : durations) {
            if (dur < 0.0) throw ConfigError("negative fault duration in task set");
            Task task{bus, 1.0, dur};
            try {
                check_task(model, task);
            } catch (const std::invalid_argument& e) {
                throw ConfigError(std::string("bad task in task set: ") + e.what());
            }
            tasks.push_back(task);
        }
    }
    return tasks;
}

static Observation observe(const GridState& state) {
    Observation obs;
    obs.reserve(state.voltages.size() + state.load_fractions.size());
    obs.insert(obs.end(), state.voltages.begin(), state.voltages.end());
    obs.insert(obs.end(), state.load_fractions.begin(), state.load_fractions.end());
    return obs;
}

ResetResult reset(const GridModel& model, const Task& task, std::uint64_t seed) {
    check_task(model, task);
    GridState state;
    state.voltages.assign(model.monitored_buses.size(), model.dynamics.v_nom);
    state.load_fractions.assign(model.load_buses.size(), 1.0);
    state.drag.assign(model.monitored_buses.size(), 0.0);
    state.cumulative_shed.assign(model.load_buses.size(), 0.0);
    state.task = task;
    state.seed = seed;
    Observation obs = observe(state);
    return ResetResult{std::move(state), std::move(obs)};
}

StepResult step(const GridModel& model, GridState& state, std::span<const double> action) {
    if (state.terminated) throw std::invalid_argument("stepping a terminated episode");
    if (action.size() != state.load_fractions.size())
        throw std::invalid_argument("action size does not match the load buses");
    for (double a : action)
        if (a < kActionMin - 1e-12 || a > kActionMax + 1e-12)
            throw std::invalid_argument("action component outside the shed range");

    const std::size_t nm = state.voltages.size();
    const std::size_t nl = state.load_fractions.size();
    const GridDynamics& dyn = model.dynamics;
    const Task& task = state.task;
    const double t_clear = task.fault_start_s + task.fault_duration_s;

    StepInfo info;
    info.t_clear_s = t_clear;
    info.shed_amounts.assign(nl, 0.0);

    // Shed commands land at the start of the interval.  Fractions are of the
    // initial load, so only what is still connected can actually be shed.
    for (std::size_t j = 0; j < nl; ++j) {
        if (action[j] < -model.action_epsilon && state.load_fractions[j] == 0.0)
            ++info.invalid_actions;
        const double next = std::max(0.0, state.load_fractions[j] + action[j]);
        info.shed_amounts[j] = state.load_fractions[j] - next;
        state.cumulative_shed[j] += info.shed_amounts[j];
        state.load_fractions[j] = next;
    }

    // Which monitored bus carries which controllable load.
    std::vector<int> load_index(nm, -1);
    for (std::size_t i = 0; i < nm; ++i)
        load_index[i] = index_of(model.load_buses, model.monitored_buses[i]);

    const int fault_row = index_of(model.fault_buses, task.fault_bus);
    const int nsub = substeps_per_action(model);

    std::vector<double> new_v(nm);
    for (int s = 0; s < nsub; ++s) {
        ++state.substep;
        const double t = static_cast<double>(state.substep) * model.dt_s;
        const bool faulted = task.fault_duration_s > 0.0 &&
                             t > task.fault_start_s + kTimeEps && t <= t_clear + kTimeEps;
        for (std::size_t i = 0; i < nm; ++i) {
            const double v = state.voltages[i];
            if (faulted) {
                new_v[i] = std::max(0.0, dyn.v_nom - model.dip_depth[fault_row][i]);
            } else {
                const double load = load_index[i] >= 0
                                        ? state.load_fractions[load_index[i]]
                                        : 0.0;
                double dv = dyn.kappa_r * (dyn.v_nom - v) - dyn.kappa_l * load * state.drag[i];
                for (std::size_t j = 0; j < nm; ++j)
                    dv -= model.coupling[i][j] * (v - state.voltages[j]);
                new_v[i] = std::max(0.0, v + model.dt_s * dv);
            }
        }
        for (std::size_t i = 0; i < nm; ++i) {
            const double v = state.voltages[i];
            const double dd = dyn.kappa_s * std::max(0.0, dyn.v_stall - v) -
                              dyn.kappa_d * std::max(0.0, v - dyn.v_rec) * state.drag[i];
            state.drag[i] = std::max(0.0, state.drag[i] + model.dt_s * dd);
        }
        state.voltages = new_v;
        state.t_s = t;
    }

    info.t_s = state.t_s;
    info.voltages = state.voltages;

    if (state.t_s >= t_clear - kTimeEps) {
        const double threshold = envelope_threshold(kDefaultEnvelope, state.t_s, t_clear);
        for (double v : state.voltages)
            if (v < threshold) { info.violation = true; break; }
    }

    if (recovery_failed(state.t_s, t_clear, state.voltages) ||
        state.t_s >= model.horizon_s - kTimeEps)
        state.terminated = true;
    info.terminated = state.terminated;

    return StepResult{observe(state), std::move(info)};
}

double envelope_threshold(const SafetyEnvelope& envelope, double t_s, double t_clear_s) {
    if (t_s < t_clear_s - kTimeEps)
        throw std::invalid_argument("envelope threshold queried during the fault");
    if (envelope.breakpoints.empty())
        throw std::invalid_argument("empty safety envelope");
    const double offset = t_s - t_clear_s;
    double threshold = envelope.breakpoints.front().second;
    for (const auto& [bp_offset, bp_threshold] : envelope.breakpoints)
        if (offset >= bp_offset) threshold = bp_threshold;
    return threshold;
}

ViolationReport check_violation(const SafetyEnvelope& envelope,
                                std::span<const StepInfo> trajectory) {
    ViolationReport report;
    if (trajectory.empty()) return report;
    report.per_bus.resize(trajectory.front().voltages.size());
    for (const StepInfo& info : trajectory) {
        if (info.t_s < info.t_clear_s - kTimeEps) continue;
        const double threshold = envelope_threshold(envelope, info.t_s, info.t_clear_s);
        for (std::size_t i = 0; i < info.voltages.size(); ++i) {
            const double v = info.voltages[i];
            if (v < threshold) {
                report.per_bus[i].push_back(ViolationSample{info.t_s, v, threshold});
                ++report.total_violation_steps;
                report.max_deficit = std::max(report.max_deficit, threshold - v);
            }
        }
    }
    return report;
}

bool recovery_failed(double t_s, double t_clear_s, std::span<const double> voltages) {
    if (t_s <= t_clear_s + kRecoveryGrace_s + kTimeEps) return false;
    for (double v : voltages)
        if (v < kRecoveryFloor_pu) return true;
    return false;
}

} // namespace gridshed
