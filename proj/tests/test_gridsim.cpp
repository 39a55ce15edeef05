#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "gridshed/errors.hpp"
#include "gridshed/gridsim.hpp"

using namespace gridshed;

namespace {

std::vector<double> zeros(std::size_t n) { return std::vector<double>(n, 0.0); }

// Runs a full episode under a fixed per-step action source, collecting infos.
std::vector<StepInfo> run_episode(const GridModel& model, const Task& task,
                                  const std::vector<std::vector<double>>& actions) {
    ResetResult rr = reset(model, task, 0);
    std::vector<StepInfo> infos;
    std::size_t k = 0;
    while (!rr.state.terminated) {
        const std::vector<double>& a =
            actions.empty() ? zeros(model.load_buses.size()) : actions[k % actions.size()];
        StepResult sr = step(model, rr.state, a);
        infos.push_back(sr.info);
        ++k;
    }
    return infos;
}

} // namespace

TEST_CASE("default model is valid and symmetric") {
    const GridModel model = default_grid_model();
    CHECK_NOTHROW(validate(model));
    CHECK(model.monitored_buses == std::vector<int>{4, 7, 8, 18});
    CHECK(model.load_buses == std::vector<int>{4, 7, 18});
    CHECK(model.fault_buses == std::vector<int>{4, 7, 15, 21});

    const std::size_t n = model.monitored_buses.size();
    REQUIRE(model.coupling.size() == n);
    for (std::size_t i = 0; i < n; ++i) {
        REQUIRE(model.coupling[i].size() == n);
        CHECK(model.coupling[i][i] == 0.0);
        for (std::size_t j = 0; j < n; ++j)
            CHECK(model.coupling[i][j] == model.coupling[j][i]);
    }
    // Strength falls off as 1/distance: buses 7 and 8 are adjacent.
    CHECK(model.coupling[1][2] == doctest::Approx(0.5).epsilon(1e-12));
    // Bus 4 to bus 7 is three hops away.
    CHECK(model.coupling[0][1] == doctest::Approx(0.5 / 3.0).epsilon(1e-12));

    // A fault at a bus pulls that bus hardest.
    REQUIRE(model.dip_depth.size() == model.fault_buses.size());
    CHECK(model.dip_depth[0][0] == doctest::Approx(0.70).epsilon(1e-12));
    CHECK(model.dip_depth[1][1] == doctest::Approx(0.70).epsilon(1e-12));
    for (const auto& row : model.dip_depth)
        for (double d : row) CHECK(d <= 0.70);
}

TEST_CASE("model validation rejects broken shapes") {
    GridModel model = default_grid_model();
    SUBCASE("asymmetric coupling") {
        model.coupling[0][1] += 0.1;
        CHECK_THROWS_AS(validate(model), ConfigError);
    }
    SUBCASE("nonzero diagonal") {
        model.coupling[2][2] = 0.3;
        CHECK_THROWS_AS(validate(model), ConfigError);
    }
    SUBCASE("load bus outside the monitored set") {
        model.load_buses.push_back(99);
        CHECK_THROWS_AS(validate(model), ConfigError);
    }
    SUBCASE("stall band inverted") {
        model.dynamics.v_stall = 0.97;
        CHECK_THROWS_AS(validate(model), ConfigError);
    }
    SUBCASE("action interval not a multiple of dt") {
        model.action_interval_s = 0.05;
        model.dt_s = 0.02;
        CHECK_THROWS_AS(validate(model), ConfigError);
    }
}

TEST_CASE("task sets are bus-major and validated") {
    const GridModel model = default_grid_model();
    const std::vector<int> buses{4, 15};
    const std::vector<double> durations{0.0, 0.15};
    const std::vector<Task> tasks = make_task_set(model, buses, durations);
    REQUIRE(tasks.size() == 4);
    CHECK(tasks[0].fault_bus == 4);
    CHECK(tasks[0].fault_duration_s == 0.0);
    CHECK(tasks[1].fault_bus == 4);
    CHECK(tasks[1].fault_duration_s == 0.15);
    CHECK(tasks[2].fault_bus == 15);
    CHECK(tasks[3].fault_bus == 15);
    for (const Task& t : tasks) CHECK(t.fault_start_s == 1.0);

    CHECK_THROWS_AS(make_task_set(model, std::vector<int>{3}, durations), ConfigError);
    CHECK_THROWS_AS(make_task_set(model, buses, std::vector<double>{-0.1}), ConfigError);
    // A fault that never clears inside the horizon is unusable.
    CHECK_THROWS_AS(make_task_set(model, buses, std::vector<double>{20.0}), ConfigError);
}

TEST_CASE("reset starts flat") {
    const GridModel model = default_grid_model();
    const ResetResult rr = reset(model, Task{4, 1.0, 0.15}, 7);
    CHECK(rr.state.t_s == 0.0);
    CHECK_FALSE(rr.state.terminated);
    REQUIRE(rr.obs.size() == 7);
    for (std::size_t i = 0; i < 4; ++i) CHECK(rr.obs[i] == 1.0);
    for (std::size_t i = 4; i < 7; ++i) CHECK(rr.obs[i] == 1.0);
    for (double v : rr.state.voltages) CHECK(v == 1.0);
    for (double d : rr.state.drag) CHECK(d == 0.0);
    for (double s : rr.state.cumulative_shed) CHECK(s == 0.0);

    CHECK_THROWS_AS(reset(model, Task{3, 1.0, 0.1}, 0), std::invalid_argument);
    CHECK_THROWS_AS(reset(model, Task{4, 1.0, -0.1}, 0), std::invalid_argument);
}

TEST_CASE("shedding arithmetic on one bus") {
    const GridModel model = default_grid_model();
    ResetResult rr = reset(model, Task{4, 1.0, 0.0}, 0);

    // 1.0 -> 0.8 -> 0.6 -> 0.5 leaves half the initial load connected.
    std::vector<double> a{-0.2, 0.0, 0.0};
    step(model, rr.state, a);
    step(model, rr.state, a);
    a[0] = -0.1;
    StepResult sr = step(model, rr.state, a);
    CHECK(rr.state.load_fractions[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(sr.info.shed_amounts[0] == doctest::Approx(0.1).epsilon(1e-12));

    // From 0.5 a full-depth command sheds exactly its magnitude.
    a[0] = -0.2;
    sr = step(model, rr.state, a);
    CHECK(rr.state.load_fractions[0] == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(sr.info.shed_amounts[0] == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(sr.info.invalid_actions == 0);

    // Commands clamp at zero: only the remaining load is shed.
    sr = step(model, rr.state, a);
    sr = step(model, rr.state, a);
    CHECK(rr.state.load_fractions[0] == 0.0);
    CHECK(sr.info.shed_amounts[0] == doctest::Approx(0.1).epsilon(1e-12));

    // Shedding an exhausted bus is flagged, sheds nothing.
    a[0] = -0.1;
    sr = step(model, rr.state, a);
    CHECK(sr.info.invalid_actions == 1);
    CHECK(sr.info.shed_amounts[0] == 0.0);

    // A tiny command below the tolerance is not flagged.
    a[0] = -0.5e-3;
    sr = step(model, rr.state, a);
    CHECK(sr.info.invalid_actions == 0);
}

TEST_CASE("action validation") {
    const GridModel model = default_grid_model();
    ResetResult rr = reset(model, Task{4, 1.0, 0.0}, 0);
    std::vector<double> bad{0.1, 0.0, 0.0};
    CHECK_THROWS_AS(step(model, rr.state, bad), std::invalid_argument);
    bad[0] = -0.3;
    CHECK_THROWS_AS(step(model, rr.state, bad), std::invalid_argument);
    CHECK_THROWS_AS(step(model, rr.state, std::vector<double>{0.0, 0.0}),
                    std::invalid_argument);

    // Exhaust the episode, then stepping again must refuse.
    while (!rr.state.terminated) step(model, rr.state, zeros(3));
    CHECK_THROWS_AS(step(model, rr.state, zeros(3)), std::invalid_argument);
}

TEST_CASE("zero-duration fault leaves the grid untouched") {
    const GridModel model = default_grid_model();
    const std::vector<StepInfo> infos = run_episode(model, Task{4, 1.0, 0.0}, {});
    CHECK(infos.size() == 100);
    for (const StepInfo& info : infos) {
        for (double v : info.voltages) CHECK(v == 1.0);
        CHECK_FALSE(info.violation);
    }
    CHECK(infos.back().terminated);
    const ViolationReport report = check_violation(SafetyEnvelope{}, infos);
    CHECK(report.total_violation_steps == 0);
    CHECK(report.max_deficit == 0.0);
}

TEST_CASE("fault pins the monitored voltages to the dip profile") {
    const GridModel model = default_grid_model();
    const std::vector<StepInfo> infos = run_episode(model, Task{4, 1.0, 0.15}, {});

    // During the fault (t in (1.0, 1.15]) the bus-4 fault holds the profile
    // 1 - 0.7/(1 + 0.18 d) at graph distances {0, 3, 2, 2}.
    const StepInfo& during = infos[10]; // t = 1.1
    CHECK(during.t_s == doctest::Approx(1.1).epsilon(1e-12));
    CHECK(during.voltages[0] == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(during.voltages[1] == doctest::Approx(1.0 - 0.7 / 1.54).epsilon(1e-12));
    CHECK(during.voltages[2] == doctest::Approx(1.0 - 0.7 / 1.36).epsilon(1e-12));
    CHECK(during.voltages[3] == doctest::Approx(1.0 - 0.7 / 1.36).epsilon(1e-12));

    // One interval after clearance the free dynamics have taken over.
    const StepInfo& after = infos[11]; // t = 1.2
    CHECK(after.voltages[0] == doctest::Approx(0.38788601659090916).epsilon(1e-12));
    CHECK(after.voltages[1] == doctest::Approx(0.59647726137069512).epsilon(1e-12));
    CHECK(after.voltages[2] == doctest::Approx(0.55762472105320848).epsilon(1e-12));
    CHECK(after.voltages[3] == doctest::Approx(0.5444862079687165).epsilon(1e-12));
}

TEST_CASE("uncontrolled faults stall and trip the recovery check") {
    const GridModel model = default_grid_model();

    const std::vector<StepInfo> mild = run_episode(model, Task{4, 1.0, 0.15}, {});
    CHECK(mild.back().terminated);
    CHECK(mild.back().t_s == doctest::Approx(5.2).epsilon(1e-12));
    ViolationReport report = check_violation(SafetyEnvelope{}, mild);
    CHECK(report.total_violation_steps == 154);
    CHECK(report.max_deficit > 0.9);

    const std::vector<StepInfo> severe = run_episode(model, Task{4, 1.0, 0.28}, {});
    report = check_violation(SafetyEnvelope{}, severe);
    CHECK(report.total_violation_steps == 162);
    double deficit = 0.0;
    for (const auto& bus : report.per_bus)
        for (const ViolationSample& s : bus) deficit += s.threshold - s.voltage;
    CHECK(deficit == doctest::Approx(85.6688185117).epsilon(1e-9));
}

TEST_CASE("shedding load lifts the recovery") {
    const GridModel model = default_grid_model();
    const Task task{4, 1.0, 0.28};

    const std::vector<StepInfo> none = run_episode(model, task, {});
    const std::vector<StepInfo> full =
        run_episode(model, task, {std::vector<double>{-0.2, -0.2, -0.2}});

    auto total_deficit = [](const std::vector<StepInfo>& infos) {
        const ViolationReport r = check_violation(SafetyEnvelope{}, infos);
        double d = 0.0;
        for (const auto& bus : r.per_bus)
            for (const ViolationSample& s : bus) d += s.threshold - s.voltage;
        return d;
    };
    CHECK(total_deficit(full) < total_deficit(none));
    CHECK_FALSE(full.back().t_s < model.horizon_s - 1e-9); // runs to horizon
    CHECK(none.back().t_s < model.horizon_s - 1e-9);       // trips early
}

TEST_CASE("envelope thresholds tighten with time since clearance") {
    const SafetyEnvelope env;
    const double tc = 1.15;
    CHECK(envelope_threshold(env, 1.30, tc) == 0.7);
    CHECK(envelope_threshold(env, 1.50, tc) == 0.8);
    CHECK(envelope_threshold(env, 1.80, tc) == 0.9);
    CHECK(envelope_threshold(env, 2.70, tc) == 0.95);
    // Window edges belong to the tighter side.
    CHECK(envelope_threshold(env, tc, tc) == 0.7);
    CHECK(envelope_threshold(env, tc + 0.33, tc) == 0.8);
    CHECK(envelope_threshold(env, tc + 0.5, tc) == 0.9);
    CHECK(envelope_threshold(env, tc + 1.5, tc) == 0.95);
    CHECK_THROWS_AS(envelope_threshold(env, 1.0, tc), std::invalid_argument);
}

TEST_CASE("violation scan is strict and skips the fault window") {
    const double tc = 1.0;
    auto make_info = [tc](double t, std::vector<double> v) {
        StepInfo info;
        info.t_s = t;
        info.t_clear_s = tc;
        info.voltages = std::move(v);
        info.shed_amounts = {0.0, 0.0, 0.0};
        return info;
    };
    std::vector<StepInfo> traj;
    traj.push_back(make_info(0.9, {0.1, 0.1, 0.1, 0.1})); // pre-clearance, exempt
    traj.push_back(make_info(2.0, {0.85, 0.95, 0.92, 0.89})); // threshold 0.9
    traj.push_back(make_info(3.0, {0.95, 0.95, 0.95, 0.95})); // exactly at 0.95

    const ViolationReport report = check_violation(SafetyEnvelope{}, traj);
    CHECK(report.total_violation_steps == 2);
    CHECK(report.max_deficit == doctest::Approx(0.05).epsilon(1e-12));
    REQUIRE(report.per_bus.size() == 4);
    CHECK(report.per_bus[0].size() == 1);
    CHECK(report.per_bus[1].empty());
    CHECK(report.per_bus[2].empty());
    CHECK(report.per_bus[3].size() == 1);
    CHECK(report.per_bus[0][0].threshold == 0.9);
    CHECK(report.per_bus[0][0].voltage == 0.85);
}

TEST_CASE("recovery failure condition") {
    const std::vector<double> low{0.94, 1.0, 1.0, 1.0};
    const std::vector<double> ok{0.95, 1.0, 1.0, 1.0};
    CHECK(recovery_failed(5.01, 1.0, low));
    CHECK_FALSE(recovery_failed(5.0, 1.0, low));  // grace period still open
    CHECK_FALSE(recovery_failed(5.01, 1.0, ok));  // at the floor is enough
    CHECK_FALSE(recovery_failed(4.0, 1.0, low));
}

TEST_CASE("episodes are deterministic in the action sequence") {
    const GridModel model = default_grid_model();
    const Task task{7, 1.0, 0.28};

    std::mt19937_64 rng(123);
    std::uniform_real_distribution<double> dist(-0.2, 0.0);
    std::vector<std::vector<double>> actions;
    for (int i = 0; i < 100; ++i)
        actions.push_back({dist(rng), dist(rng), dist(rng)});

    const std::vector<StepInfo> a = run_episode(model, task, actions);
    const std::vector<StepInfo> b = run_episode(model, task, actions);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].t_s == b[i].t_s);
        CHECK(a[i].voltages == b[i].voltages);
        CHECK(a[i].shed_amounts == b[i].shed_amounts);
        CHECK(a[i].violation == b[i].violation);
    }
}

TEST_CASE("load fractions stay in range and never rebound") {
    const GridModel model = default_grid_model();
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> dist(-0.2, 0.0);

    for (const Task& task : make_task_set(model, std::vector<int>{4, 21},
                                          std::vector<double>{0.0, 0.28})) {
        ResetResult rr = reset(model, task, 0);
        std::vector<double> prev(rr.state.load_fractions);
        while (!rr.state.terminated) {
            const std::vector<double> a{dist(rng), dist(rng), dist(rng)};
            step(model, rr.state, a);
            for (std::size_t j = 0; j < prev.size(); ++j) {
                CHECK(rr.state.load_fractions[j] >= 0.0);
                CHECK(rr.state.load_fractions[j] <= prev[j]);
            }
            for (double v : rr.state.voltages) CHECK(v >= 0.0);
            prev = rr.state.load_fractions;
        }
    }
}
