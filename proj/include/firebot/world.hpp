#pragma once

// Ground-truth world description: building, fire targets, robot, sensors,
// water system, drift model and mission knobs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "firebot/error.hpp"
#include "firebot/geometry.hpp"

namespace firebot {

inline constexpr double kZeroCelsius = 273.15;
inline constexpr double kGravity = 9.81;

struct WallSegment {
    Vec2 p0 = Vec2::Zero();
    Vec2 p1 = Vec2::Zero();
    double height = 3.0;

    double length() const { return (p1 - p0).norm(); }
    Vec2 direction() const { return (p1 - p0).normalized(); }
    /// Left-hand normal; points into the room for a counter-clockwise outer loop.
    Vec2 left_normal() const {
        const Vec2 d = direction();
        return {-d.y(), d.x()};
    }
};

struct DoorGap {
    int wall_index = 0;
    double offset = 0.0;  // distance from the wall's p0 to the gap center
    double width = 1.2;
};

struct BuildingLayout {
    std::vector<WallSegment> outer_walls;  // counter-clockwise loop
    std::vector<DoorGap> door_gaps;
    std::vector<Vec2> pedestal;  // closed polygon, counter-clockwise
    double pedestal_height = 1.2;
};

struct FireTarget {
    // Element frame: origin at the element center on the back plate, +z the
    // outward wall normal, +y up, +x along the wall.
    Transform3D element_center;
    double element_width = 0.035;
    double element_height = 0.060;
    double setpoint_temp = 120.0;
    double emissivity = 0.55;
    double front_plate_offset = 0.15;
    double aperture_diameter = 0.15;
    double front_plate_size = 0.40;  // square plexiglass cover, edge length
    bool extinguished = false;
    double liters_required = 1.0;

    Vec3 position() const { return element_center.translation; }
    Vec3 normal() const { return element_center.rotation.col(2); }
};

/// Element frame for a wall-mounted target. `normal` need not be unit length
/// but must be horizontal and non-zero.
inline Transform3D element_frame(const Vec3& position, const Vec2& normal) {
    const double n = normal.norm();
    if (!(n > 0.0)) throw Error(ErrorKind::validation_error, "target normal must be non-zero");
    const Vec3 z(normal.x() / n, normal.y() / n, 0.0);
    const Vec3 y = Vec3::UnitZ();
    Mat3 r;
    r.col(0) = y.cross(z);
    r.col(1) = y;
    r.col(2) = z;
    return {position, r};
}

struct RobotParams {
    double footprint_length = 0.56;
    double footprint_width = 0.70;
    double body_height = 0.40;
    double max_speed_outdoor = 2.0;
    double max_speed_indoor = 0.6;
    double max_yaw_rate = 1.5;
    Transform3D arm_mount = Transform3D::from_translation(Vec3(0.0, 0.0, 0.45));
    std::vector<double> link_lengths{0.28, 0.28, 0.21, 0.13};
    double reach = 0.90;
    double max_linear_arm_speed = 0.20;
    // Depth camera pose in the thermal camera (optical) frame: 5 cm above it.
    Transform3D thermal_to_depth = Transform3D::from_translation(Vec3(0.0, -0.05, 0.0));
    // Nozzle pose in the end-effector frame; its x axis is the jet direction.
    Transform3D nozzle_offset = Transform3D::from_translation(Vec3(0.03, 0.0, -0.04));

    double half_width() const { return footprint_width / 2.0; }
    double half_diagonal() const { return 0.5 * std::hypot(footprint_length, footprint_width); }
    double inflation_radius() const { return half_width() + 0.1; }
};

struct SensorParams {
    int thermal_width = 160;
    int thermal_height = 120;
    double thermal_hfov = deg2rad(57.0);
    double thermal_dfov = deg2rad(71.0);
    double thermal_rate = 8.7;
    double thermal_noise = 0.1;

    int depth_width = 640;
    int depth_height = 480;
    double depth_hfov = deg2rad(87.0);
    double depth_vfov = deg2rad(58.0);
    double depth_rate = 30.0;
    double depth_noise = 0.01;
    double depth_min = 0.1;
    double depth_max = 10.0;

    int scan_beams = 1024;
    int scan_rings = 32;
    double scan_vfov = deg2rad(45.0);
    double scan_rate = 10.0;
    double scan_noise = 0.03;
    double scan_max = 120.0;
    double lidar_height = 0.55;

    double thermal_vfov() const { return vfov_from_hfov_dfov(thermal_hfov, thermal_dfov); }
};

struct WaterSystemParams {
    double tank_volume = 15.0;      // L
    double pump_pressure = 1.0e5;   // Pa
    double nozzle_diameter = 0.00381;  // m
    double min_reach = 1.5;         // m
    double water_density = 1000.0;  // kg/m^3
};

struct DriftParams {
    double sigma_t = 0.03;  // m per sqrt(m), per axis
    double sigma_r = 0.02;  // rad per sqrt(rad)
    Vec2 bias{0.005, 0.0};  // world-frame drift, m per m travelled
};

enum class WaypointSource { hand_set, extracted };
enum class SearchLoop { outer_walls, pedestal };
enum class WigglePatternType { raster, quadrature };

struct MissionParams {
    double detection_threshold = 50.0;
    int min_blob_pixels = 2;
    double standoff = 1.5;
    double waypoint_spacing = 0.5;
    std::vector<SearchLoop> search_loops{SearchLoop::outer_walls, SearchLoop::pedestal};
    double hand_waypoint_error = 0.4;
    double pump_cycle = 20.0;
    double fine_align_timeout = 30.0;
    double global_timeout = 900.0;
    bool refill_enabled = false;
    WigglePatternType wiggle_pattern = WigglePatternType::raster;
    double wiggle_amplitude = std::atan(0.09 / 1.5);
    double wiggle_period = 4.0;
    double tol_lateral = 0.02;
    double tol_elevation = deg2rad(0.3);
    double horizontal_gain = 1.0;
    double vertical_gain = 0.8;
};

struct Scenario {
    BuildingLayout layout;
    std::vector<FireTarget> targets;
    RobotParams robot;
    SensorParams sensors;
    WaterSystemParams water;
    DriftParams drift;
    MissionParams mission;
    Pose2D start_pose{5.0, -6.0, kPi / 2.0};
    double ambient_temp = 25.0;
    std::uint64_t seed = 0;
    WaypointSource waypoint_source = WaypointSource::extracted;
    bool fine_alignment_enabled = true;
};

/// Reported temperature of a gray body at `true_temp` (Celsius), ignoring
/// reflected ambient radiation: T_app = eps^(1/4) * T_true[K].
inline double apparent_temperature(double true_temp, double emissivity) {
    if (!(emissivity > 0.0 && emissivity <= 1.0)) {
        throw Error(ErrorKind::domain_error, "emissivity must lie in (0, 1]");
    }
    if (!(true_temp >= -kZeroCelsius) || !std::isfinite(true_temp)) {
        throw Error(ErrorKind::domain_error, "temperature below absolute zero");
    }
    return std::pow(emissivity, 0.25) * (true_temp + kZeroCelsius) - kZeroCelsius;
}

struct ApertureDisc {
    Vec3 center;
    Vec3 normal;
    double radius;
};

inline ApertureDisc aperture_disc(const FireTarget& t) {
    const Vec3 n = t.normal();
    return {t.position() + t.front_plate_offset * n, n, t.aperture_diameter / 2.0};
}

/// Wall pieces that physically exist once door gaps are cut out.
inline std::vector<WallSegment> solid_wall_pieces(const BuildingLayout& layout) {
    std::vector<WallSegment> out;
    for (std::size_t i = 0; i < layout.outer_walls.size(); ++i) {
        const WallSegment& w = layout.outer_walls[i];
        std::vector<std::pair<double, double>> cuts;
        for (const DoorGap& g : layout.door_gaps) {
            if (g.wall_index == static_cast<int>(i)) {
                cuts.emplace_back(g.offset - g.width / 2.0, g.offset + g.width / 2.0);
            }
        }
        std::sort(cuts.begin(), cuts.end());
        const double len = w.length();
        const Vec2 d = w.direction();
        double s = 0.0;
        for (const auto& [a, b] : cuts) {
            if (a > s) out.push_back({w.p0 + s * d, w.p0 + a * d, w.height});
            s = std::max(s, b);
        }
        if (s < len) out.push_back({w.p0 + s * d, w.p1, w.height});
    }
    return out;
}

inline Vec2 gap_center(const BuildingLayout& layout, const DoorGap& g) {
    const WallSegment& w = layout.outer_walls.at(static_cast<std::size_t>(g.wall_index));
    return w.p0 + g.offset * w.direction();
}

inline double polygon_signed_area(const std::vector<Vec2>& poly) {
    double a = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Vec2& p = poly[i];
        const Vec2& q = poly[(i + 1) % poly.size()];
        a += p.x() * q.y() - q.x() * p.y();
    }
    return 0.5 * a;
}

inline bool point_in_polygon(const std::vector<Vec2>& poly, const Vec2& p) {
    bool inside = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[j];
        if ((a.y() > p.y()) != (b.y() > p.y()) &&
            p.x() < (b.x() - a.x()) * (p.y() - a.y()) / (b.y() - a.y()) + a.x()) {
            inside = !inside;
        }
    }
    return inside;
}

inline std::vector<Vec2> outer_loop_polygon(const BuildingLayout& layout) {
    std::vector<Vec2> poly;
    for (const WallSegment& w : layout.outer_walls) poly.push_back(w.p0);
    return poly;
}

/// Building used when a scenario omits its layout: 10 m x 10 m room with a
/// 1.2 m door in the south wall and a 2 m x 2 m central pedestal.
inline BuildingLayout default_layout() {
    BuildingLayout l;
    const double h = 3.0;
    l.outer_walls = {
        {Vec2(0, 0), Vec2(10, 0), h},
        {Vec2(10, 0), Vec2(10, 10), h},
        {Vec2(10, 10), Vec2(0, 10), h},
        {Vec2(0, 10), Vec2(0, 0), h},
    };
    l.door_gaps = {{0, 5.0, 1.2}};
    l.pedestal = {Vec2(4, 4), Vec2(6, 4), Vec2(6, 6), Vec2(4, 6)};
    l.pedestal_height = 1.2;
    return l;
}

/// Target mounted on outer wall `wall_index`, `offset` metres from the wall's p0.
inline FireTarget wall_target(const BuildingLayout& layout, int wall_index, double offset, double height) {
    const WallSegment& w = layout.outer_walls.at(static_cast<std::size_t>(wall_index));
    const Vec2 p = w.p0 + offset * w.direction();
    FireTarget t;
    t.element_center = element_frame(Vec3(p.x(), p.y(), height), w.left_normal());
    return t;
}

inline Scenario default_scenario() {
    Scenario s;
    s.layout = default_layout();
    s.targets = {wall_target(s.layout, 2, 3.0, 1.0)};
    return s;
}

}  // namespace firebot
