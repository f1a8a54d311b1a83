#include <gtest/gtest.h>

#include <cmath>

#include "firebot/mission.hpp"
#include "firebot/scenario_io.hpp"

using namespace firebot;

namespace {

Scenario load(const std::string& name, std::uint64_t seed = 7) {
    Scenario s = load_scenario_file(std::string(FIREBOT_SCENARIO_DIR) + "/" + name);
    s.seed = seed;
    return s;
}

const std::vector<std::string> kNominal{state::outdoor_nav, state::door_traverse, state::indoor_search,
                                        state::abate_pose,  state::wall_align,    state::fine_align,
                                        state::pump_cycle,  state::recheck,       state::indoor_search,
                                        state::done};

struct TickCheck {
    double max_step_outdoor = 0.0;
    double max_step_indoor = 0.0;
    int outdoor_ticks = 0;
    int search_ticks = 0;
    int folded_misses = 0;
    int raised_misses = 0;
    int search_arm_settled = 0;
};

// same loop as run_firefight, with a per-tick probe on the true pose and arm
TickCheck run_probed(const Scenario& s, EventLog& log) {
    MissionContext ctx;
    init_context(ctx, s);
    SimClock clock{0.01, s.mission.global_timeout, 0};
    ctx.clock = &clock;
    TickCheck out;
    Pose2D prev = ctx.odo.true_pose;
    auto probe = [&](MissionContext& c, SimClock& k) {
        advance_world(c, k);
        const double step = std::hypot(c.odo.true_pose.x - prev.x, c.odo.true_pose.y - prev.y);
        prev = c.odo.true_pose;
        if (c.current_state == state::outdoor_nav) {
            ++out.outdoor_ticks;
            out.max_step_outdoor = std::max(out.max_step_outdoor, step);
            if (!c.arm_motion && c.q != named_pose(NamedPose::folded)) ++out.folded_misses;
        } else if (c.current_state == state::indoor_search) {
            ++out.search_ticks;
            out.max_step_indoor = std::max(out.max_step_indoor, step);
            if (!c.arm_motion) {
                ++out.search_arm_settled;
                if (c.q != named_pose(NamedPose::raised, c.side)) ++out.raised_misses;
            }
        }
    };
    run_machine<MissionContext>(firefight_states(s), build_firefight_mission(), ctx, clock, log, {}, probe);
    return out;
}

}  // namespace

TEST(Mission, TableIsValid) {
    const Scenario s = load("nominal.json");
    EXPECT_NO_THROW(validate_table(firefight_states(s), build_firefight_mission()));
}

TEST(Mission, NominalTraceOrder) {
    const MissionResult r = run_firefight(load("nominal.json"));
    EXPECT_EQ(visited_states(r.log), kNominal);
    EXPECT_EQ(r.terminal, state::done);
    ASSERT_EQ(r.targets.size(), 1u);
    EXPECT_TRUE(r.targets[0].extinguished);
}

TEST(Mission, RecheckAfterSuccessAdvances) {
    const MissionResult r = run_firefight(load("nominal.json"));
    int rechecks = 0;
    for (const Event& e : r.log) {
        if (e.from != state::recheck) continue;
        ++rechecks;
        EXPECT_EQ(e.outcome, "extinguished");
        EXPECT_EQ(e.to, state::indoor_search);
    }
    EXPECT_EQ(rechecks, 1);
    EXPECT_GE(r.ledger.liters_through[0], r.targets[0].liters_required);
}

TEST(Mission, FineAlignmentOffIsPassThrough) {
    Scenario s = load("nominal.json");
    s.fine_alignment_enabled = false;
    const MissionResult r = run_firefight(s);
    std::vector<std::string> seq = visited_states(r.log);
    // same graph position, but nothing from the thermal/depth pipeline drives the aim
    EXPECT_EQ(std::vector<std::string>(seq.begin(), seq.begin() + 7), std::vector<std::string>(kNominal.begin(), kNominal.begin() + 7));
    for (const Event& e : r.log) {
        if (e.from == state::fine_align) {
            EXPECT_EQ(e.outcome, "aligned");
        }
    }
    EXPECT_EQ(r.stats.target_estimates, 0);
    EXPECT_TRUE(r.stats.estimate_times.empty());
}

TEST(Mission, ZeroTargetsCompletesSearch) {
    Scenario s = load("nominal.json");
    s.targets.clear();
    const MissionResult r = run_firefight(s);
    EXPECT_EQ(r.terminal, state::done);
    EXPECT_EQ(visited_states(r.log), (std::vector<std::string>{state::outdoor_nav, state::door_traverse,
                                                                state::indoor_search, state::done}));
    EXPECT_TRUE(r.ledger.liters_through.empty());
    EXPECT_EQ(r.ledger.liters_ejected, 0.0);
    EXPECT_EQ(r.stats.pump_cycles, 0);
    EXPECT_EQ(r.log.back().outcome, "search_complete");
    EXPECT_GT(r.stats.indoor_waypoints_completed, 0);
}

TEST(Mission, EventLogDeterministic) {
    const MissionResult a = run_firefight(load("nominal.json", 11));
    const MissionResult b = run_firefight(load("nominal.json", 11));
    ASSERT_EQ(a.log.size(), b.log.size());
    for (std::size_t i = 0; i < a.log.size(); ++i) {
        EXPECT_EQ(a.log[i].time, b.log[i].time);
        EXPECT_EQ(a.log[i].from, b.log[i].from);
        EXPECT_EQ(a.log[i].outcome, b.log[i].outcome);
        EXPECT_EQ(a.log[i].to, b.log[i].to);
    }
    EXPECT_EQ(a.duration, b.duration);
    ASSERT_EQ(a.trajectory.size(), b.trajectory.size());
    EXPECT_EQ(a.trajectory.back().estimated_pose.x, b.trajectory.back().estimated_pose.x);
}

TEST(Mission, EventLogStrictlyIncreasing) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const MissionResult r = run_firefight(load("nominal.json", seed));
        for (std::size_t i = 1; i < r.log.size(); ++i) EXPECT_GT(r.log[i].time, r.log[i - 1].time) << seed;
    }
}

TEST(Mission, PerTickSpeedAndArmPose) {
    for (std::uint64_t seed : {7u, 21u}) {
        const Scenario s = load("nominal.json", seed);
        EventLog log;
        const TickCheck t = run_probed(s, log);
        EXPECT_EQ(log[5].to, state::fine_align) << seed;
        const double dt = 0.01;
        EXPECT_GT(t.outdoor_ticks, 100);
        EXPECT_GT(t.search_ticks, 100);
        EXPECT_LE(t.max_step_outdoor, s.robot.max_speed_outdoor * dt + 1e-9);
        EXPECT_LE(t.max_step_indoor, s.robot.max_speed_indoor * dt + 1e-9);
        EXPECT_LE(s.robot.max_speed_indoor, 0.6);
        EXPECT_LE(s.robot.max_speed_outdoor, 2.0);
        // the outdoor leg actually uses its higher limit
        EXPECT_GT(t.max_step_outdoor, s.robot.max_speed_indoor * dt);
        EXPECT_EQ(t.folded_misses, 0);
        EXPECT_EQ(t.raised_misses, 0);
        EXPECT_GT(t.search_arm_settled, 100);
    }
}

TEST(Mission, PumpCycleLastsTwentySeconds) {
    for (const char* name : {"nominal.json", "second_cycle.json"}) {
        const Scenario s = load(name);
        const MissionResult r = run_firefight(s);
        int cycles = 0;
        for (std::size_t i = 1; i < r.log.size(); ++i) {
            if (r.log[i].from != state::pump_cycle) continue;
            ++cycles;
            EXPECT_EQ(r.log[i - 1].to, state::pump_cycle);
            EXPECT_NEAR(r.log[i].time - r.log[i - 1].time, s.mission.pump_cycle, 0.01 + 1e-9) << name;
        }
        EXPECT_EQ(cycles, r.stats.pump_cycles);
        EXPECT_GE(cycles, 1);
    }
}

TEST(Mission, SecondCycleReentersFineAlign) {
    const MissionResult r = run_firefight(load("second_cycle.json"));
    std::vector<std::string> want = kNominal;
    want.insert(want.begin() + 8, {state::fine_align, state::pump_cycle, state::recheck});
    EXPECT_EQ(visited_states(r.log), want);
    EXPECT_TRUE(r.targets[0].extinguished);
}

TEST(Mission, EstimatesAtThermalFrameRate) {
    const Scenario s = load("nominal.json");
    const MissionResult r = run_firefight(s);
    const double frame = 1.0 / s.sensors.thermal_rate;
    ASSERT_GT(r.stats.estimate_times.size(), 5u);
    for (std::size_t i = 1; i < r.stats.estimate_times.size(); ++i) {
        const double gap = r.stats.estimate_times[i] - r.stats.estimate_times[i - 1];
        EXPECT_GE(gap, frame - 1e-9);
        // stamped with a frame time k / rate
        const double k = r.stats.estimate_times[i] * s.sensors.thermal_rate;
        EXPECT_NEAR(k, std::round(k), 1e-6);
    }
    // inside FineAlign a new estimate on every thermal frame
    int checked = 0;
    for (std::size_t i = 1; i < r.log.size(); ++i) {
        if (r.log[i].from != state::fine_align) continue;
        const double t0 = r.log[i - 1].time, t1 = r.log[i].time;
        int n = 0;
        for (double t : r.stats.estimate_times) n += t > t0 + 1e-9 && t <= t1 + 1e-9;
        const int frames = static_cast<int>(std::floor(t1 * s.sensors.thermal_rate + 1e-9) -
                                            std::floor(t0 * s.sensors.thermal_rate + 1e-9));
        EXPECT_EQ(n, frames);
        ++checked;
    }
    EXPECT_GE(checked, 1);
}

TEST(Mission, GlobalTimeoutReported) {
    Scenario s = load("nominal.json");
    s.mission.global_timeout = 30.0;
    const MissionResult r = run_firefight(s);
    EXPECT_EQ(r.terminal, "global_timeout");
    EXPECT_NEAR(r.duration, 30.0, 0.011);
    EXPECT_FALSE(r.stats.failure_reason.empty());
}
