#include <cmath>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "firebot/scenario_io.hpp"
#include "firebot/world.hpp"

using namespace firebot;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    return ErrorKind::invalid_argument;
}

std::string message_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST(Radiometry, ElementAtHalfEmissivity) {
    const double t = apparent_temperature(120.0, 0.55);
    EXPECT_NEAR(t, 65.4, 0.05);
    // independent evaluation: eps^(1/4) * 393.15 K
    EXPECT_NEAR(t + 273.15, std::sqrt(std::sqrt(0.55)) * 393.15, 1e-9);
    EXPECT_LE(std::abs(t - 70.0), 5.0);
}

TEST(Radiometry, BlackbodyAndAbsoluteZero) {
    EXPECT_NEAR(apparent_temperature(120.0, 1.0), 120.0, 1e-12);
    EXPECT_NEAR(apparent_temperature(-273.15, 0.55), -273.15, 1e-9);
}

TEST(Radiometry, DomainErrors) {
    EXPECT_EQ(kind_of([] { apparent_temperature(100.0, 0.0); }), ErrorKind::domain_error);
    EXPECT_EQ(kind_of([] { apparent_temperature(100.0, 1.2); }), ErrorKind::domain_error);
    EXPECT_EQ(kind_of([] { apparent_temperature(-300.0, 0.5); }), ErrorKind::domain_error);
}

TEST(Radiometry, MonotoneAndNeverAboveTrue) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> temp(-50.0, 800.0), eps(0.01, 1.0);
    for (int i = 0; i < 1000; ++i) {
        const double t = temp(rng), e = eps(rng);
        const double a = apparent_temperature(t, e);
        EXPECT_LE(a, t + 1e-9);
        EXPECT_GT(apparent_temperature(t + 1.0, e), a);
        EXPECT_GE(apparent_temperature(t, std::min(1.0, e + 0.01)), a);
    }
}

TEST(Target, ApertureDiscOfDefaultTarget) {
    const FireTarget t = default_scenario().targets.front();
    const ApertureDisc d = aperture_disc(t);
    EXPECT_DOUBLE_EQ(d.radius, 0.075);
    EXPECT_NEAR((d.center - t.position()).norm(), 0.15, 1e-12);
    EXPECT_NEAR(d.normal.norm(), 1.0, 1e-12);
}

TEST(Target, WallTargetFacesIntoTheRoom) {
    const Scenario s = default_scenario();
    const FireTarget& t = s.targets.front();
    EXPECT_NEAR(t.position().x(), 7.0, 1e-12);
    EXPECT_NEAR(t.position().y(), 10.0, 1e-12);
    EXPECT_NEAR(t.normal().y(), -1.0, 1e-12);
    EXPECT_TRUE(t.element_center.is_valid());
}

TEST(Layout, SolidPiecesLeaveTheDoorOpen) {
    const BuildingLayout l = default_layout();
    const auto pieces = solid_wall_pieces(l);
    ASSERT_EQ(pieces.size(), 5u);
    double total = 0.0;
    for (const auto& p : pieces) total += p.length();
    EXPECT_NEAR(total, 40.0 - 1.2, 1e-12);
    EXPECT_NEAR(gap_center(l, l.door_gaps.front()).x(), 5.0, 1e-12);
    EXPECT_GT(polygon_signed_area(outer_loop_polygon(l)), 0.0);
}

TEST(ScenarioLoad, MinimalDocumentGetsDefaults) {
    const Scenario s = load_scenario("{}");
    EXPECT_DOUBLE_EQ(s.water.tank_volume, 15.0);
    EXPECT_DOUBLE_EQ(s.water.pump_pressure, 1.0e5);
    EXPECT_DOUBLE_EQ(s.water.nozzle_diameter, 0.00381);
    EXPECT_EQ(s.seed, 0u);
    EXPECT_DOUBLE_EQ(s.targets.front().liters_required, 1.0);
    EXPECT_DOUBLE_EQ(s.robot.max_speed_outdoor, 2.0);
    EXPECT_DOUBLE_EQ(s.robot.max_speed_indoor, 0.6);
    EXPECT_NEAR(s.robot.reach, 0.90, 1e-12);
}

TEST(ScenarioLoad, BadEmissivityIsNamed) {
    const auto f = [] { load_scenario(R"({"targets": [{"wall": 2, "offset": 3, "emissivity": 1.3}]})"); };
    EXPECT_EQ(kind_of(f), ErrorKind::validation_error);
    EXPECT_NE(message_of(f).find("emissivity"), std::string::npos);
}

TEST(ScenarioLoad, OtherInvariantViolations) {
    EXPECT_EQ(kind_of([] { load_scenario(R"({"water": {"tank_volume": 0}})"); }), ErrorKind::validation_error);
    EXPECT_EQ(kind_of([] { load_scenario(R"({"layout": {"door_gaps": [{"wall": 0, "offset": 5, "width": 0.5}]}})"); }),
              ErrorKind::validation_error);
    EXPECT_EQ(kind_of([] { load_scenario(R"({"targets": []})"); }), ErrorKind::validation_error);
    EXPECT_EQ(kind_of([] { load_scenario(R"({"robot": {"reach": 1.2}})"); }), ErrorKind::validation_error);
    EXPECT_EQ(kind_of([] { load_scenario(R"({"layout": {"pedestal": [[4, 4], [16, 4], [16, 6]]}})"); }),
              ErrorKind::validation_error);
    EXPECT_EQ(kind_of([] { load_scenario(R"({"seed": -3})"); }), ErrorKind::validation_error);
    EXPECT_EQ(kind_of([] { load_scenario(R"({"seed": "seven"})"); }), ErrorKind::validation_error);
}

TEST(ScenarioLoad, ParseErrors) {
    EXPECT_EQ(kind_of([] { load_scenario("{not json"); }), ErrorKind::parse_error);
    EXPECT_EQ(kind_of([] { load_scenario("[1, 2]"); }), ErrorKind::parse_error);
    EXPECT_EQ(kind_of([] { load_scenario_file("/nonexistent/scenario.json"); }), ErrorKind::io_error);
}

TEST(ScenarioLoad, RoundTripIsStable) {
    const Scenario a = load_scenario_file(std::string(FIREBOT_SCENARIO_DIR) + "/nominal.json");
    const std::string first = serialize_scenario(a);
    const Scenario b = load_scenario(first);
    EXPECT_EQ(serialize_scenario(b), first);
    EXPECT_EQ(b.seed, a.seed);
    EXPECT_EQ(b.targets.size(), a.targets.size());
    EXPECT_EQ(b.layout.outer_walls.size(), a.layout.outer_walls.size());
}

TEST(ScenarioLoad, RoundTripOfNonDefaultValues) {
    Scenario s = default_scenario();
    s.seed = 123456789;
    s.drift.sigma_r = 0.037;
    s.drift.bias = Vec2(-0.001, 0.002);
    s.fine_alignment_enabled = false;
    s.waypoint_source = WaypointSource::hand_set;
    s.targets.front().liters_required = 2.25;
    s.mission.search_loops = {SearchLoop::outer_walls};
    const std::string text = serialize_scenario(s);
    const Scenario b = load_scenario(text);
    EXPECT_EQ(serialize_scenario(b), text);
    EXPECT_EQ(b.seed, 123456789u);
    EXPECT_DOUBLE_EQ(b.drift.sigma_r, 0.037);
    EXPECT_FALSE(b.fine_alignment_enabled);
    EXPECT_EQ(b.waypoint_source, WaypointSource::hand_set);
    EXPECT_DOUBLE_EQ(b.targets.front().liters_required, 2.25);
    EXPECT_EQ(b.mission.search_loops.size(), 1u);
}

TEST(ScenarioLoad, ShippedScenariosValidate) {
    for (const char* name : {"nominal", "second_cycle", "hand_waypoints", "no_fine_align"}) {
        EXPECT_NO_THROW(load_scenario_file(std::string(FIREBOT_SCENARIO_DIR) + "/" + name + ".json")) << name;
    }
}
