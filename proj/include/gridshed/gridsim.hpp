#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace gridshed {

// Shed command range, per action interval, as a fraction of the initial bus load.
inline constexpr double kActionMin = -0.2;
inline constexpr double kActionMax = 0.0;

// Recovery failure: this long after fault clearance, every monitored voltage
// must be back above the floor or the episode ends with the terminal penalty.
inline constexpr double kRecoveryGrace_s = 4.0;
inline constexpr double kRecoveryFloor_pu = 0.95;

// One episode scenario: a fault at a fixed bus, self-cleared after a fixed time.
struct Task {
    int fault_bus = 4;
    double fault_start_s = 1.0;
    double fault_duration_s = 0.0; // 0 means no fault at all
};

// Rates and thresholds of the delayed-recovery dynamics.  Stalled induction
// load is modelled as a per-bus "drag" that builds while voltage is below
// v_stall and bleeds off only once voltage is back above v_rec.
struct GridDynamics {
    double kappa_r = 2.5;  // voltage pull toward nominal, 1/s
    double kappa_l = 3.0;  // drag-induced depression per unit of remaining load
    double kappa_s = 1.6;  // drag build-up rate below v_stall
    double kappa_d = 4.0;  // drag decay rate above v_rec
    double v_stall = 0.8;  // p.u.
    double v_rec = 0.95;   // p.u.
    double v_nom = 1.0;    // p.u.
};

struct GridModel {
    std::vector<int> load_buses{4, 7, 18};       // controllable load
    std::vector<int> monitored_buses{4, 7, 8, 18};
    std::vector<int> fault_buses{4, 7, 15, 21};  // admissible fault locations
    // coupling[i][j]: symmetric, non-negative, zero diagonal; pulls monitored
    // bus voltages toward each other.
    std::vector<std::vector<double>> coupling;
    // dip_depth[f][i]: voltage drop at monitored bus i while fault_buses[f]
    // is faulted.  Entries in [0, 1).
    std::vector<std::vector<double>> dip_depth;
    GridDynamics dynamics;
    double dt_s = 0.02;              // Euler substep
    double action_interval_s = 0.1;  // one shed command per interval
    double horizon_s = 10.0;
    double action_epsilon = 1e-3;    // commands below this are not "real" sheds
};

// Default four-bus surrogate of the 39-bus system.  Coupling and dip depths
// fall off with graph distance between buses; see gridsim.cpp for the tables.
GridModel default_grid_model();

// Throws ConfigError when shapes, symmetry, ranges, or bus sets are off.
void validate(const GridModel& model);

struct GridState {
    double t_s = 0.0;
    std::vector<double> voltages;        // per monitored bus, p.u.
    std::vector<double> load_fractions;  // per load bus, fraction of initial load
    std::vector<double> drag;            // per monitored bus, >= 0
    std::vector<double> cumulative_shed; // per load bus, p.u.
    Task task;                           // scenario this episode is running
    std::uint64_t seed = 0;
    long substep = 0;                    // t_s == substep * dt_s
    bool terminated = false;
};

// Monitored voltages followed by load fractions.
using Observation = std::vector<double>;

struct StepInfo {
    double t_s = 0.0;
    double t_clear_s = 0.0;
    std::vector<double> voltages;      // per monitored bus, end of interval
    std::vector<double> shed_amounts;  // per load bus, p.u. shed this step
    int invalid_actions = 0;           // sheds commanded at exhausted buses
    bool terminated = false;
    bool violation = false;            // any monitored bus below the envelope
};

struct ResetResult {
    GridState state;
    Observation obs;
};

struct StepResult {
    Observation obs;
    StepInfo info;
};

// Minimum-voltage envelope after fault clearance: piecewise-constant
// thresholds keyed by offset since clearance, ascending, starting at 0.
struct SafetyEnvelope {
    std::vector<std::pair<double, double>> breakpoints{
        {0.0, 0.7}, {0.33, 0.8}, {0.5, 0.9}, {1.5, 0.95}};
};

struct ViolationSample {
    double t_s = 0.0;
    double voltage = 0.0;
    double threshold = 0.0;
};

struct ViolationReport {
    // One list per monitored bus, in model order.
    std::vector<std::vector<ViolationSample>> per_bus;
    int total_violation_steps = 0;  // (bus, step) pairs below threshold
    double max_deficit = 0.0;       // worst threshold - voltage seen
};

// Bus-major Cartesian product of buses x durations.  Throws ConfigError for
// buses outside model.fault_buses or negative durations.
std::vector<Task> make_task_set(const GridModel& model,
                                std::span<const int> buses,
                                std::span<const double> durations);

// Flat start: nominal voltages, full load, zero drag.  The seed is recorded
// for reproducibility bookkeeping; the surrogate itself is deterministic.
ResetResult reset(const GridModel& model, const Task& task, std::uint64_t seed);

// Applies one shed command (fractions of initial load, each in
// [kActionMin, kActionMax]) and integrates one action interval.
// Throws std::invalid_argument on wrong action size, out-of-range components,
// or stepping a terminated episode.
StepResult step(const GridModel& model, GridState& state, std::span<const double> action);

// Threshold in force at time t_s for an episode cleared at t_clear_s.
// Throws std::invalid_argument when t_s is before clearance.
double envelope_threshold(const SafetyEnvelope& envelope, double t_s, double t_clear_s);

// Scans a time-ordered trajectory for post-clearance samples strictly below
// the envelope.  Steps before clearance are exempt.
ViolationReport check_violation(const SafetyEnvelope& envelope,
                                std::span<const StepInfo> trajectory);

// True when the episode-ending condition holds: past the grace period after
// clearance with some monitored voltage still below the recovery floor.
bool recovery_failed(double t_s, double t_clear_s, std::span<const double> voltages);

} // namespace gridshed
