#pragma once

// JSON scenario documents. Lengths in metres, angles in radians, temperatures
// in Celsius, pressures in Pa, volumes in litres. Every key is optional; a
// missing key keeps the default from world.hpp. See README for the schema.

#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "firebot/world.hpp"

namespace firebot {

namespace detail {

using json = nlohmann::json;

template <typename T>
void read_field(const json& j, const char* key, T& out, const std::string& path) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw Error(ErrorKind::validation_error, path + key + " has the wrong type");
    }
}

inline Vec2 read_vec2(const json& j, const std::string& name) {
    if (!j.is_array() || j.size() != 2) throw Error(ErrorKind::validation_error, name + " must be [x, y]");
    return {j[0].get<double>(), j[1].get<double>()};
}

inline Vec3 read_vec3(const json& j, const std::string& name) {
    if (!j.is_array() || j.size() != 3) throw Error(ErrorKind::validation_error, name + " must be [x, y, z]");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline json vec_json(const Vec2& v) { return json::array({v.x(), v.y()}); }
inline json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline Transform3D read_transform(const json& j, const std::string& name) {
    Transform3D t;
    if (j.contains("translation")) t.translation = read_vec3(j["translation"], name + ".translation");
    if (j.contains("rotation")) {
        const json& r = j["rotation"];
        if (!r.is_array() || r.size() != 3) throw Error(ErrorKind::validation_error, name + ".rotation must be 3x3");
        for (int i = 0; i < 3; ++i) t.rotation.row(i) = read_vec3(r[i], name + ".rotation").transpose();
    }
    if (!t.is_valid()) throw Error(ErrorKind::validation_error, name + " is not a rigid transform");
    return t;
}

inline json transform_json(const Transform3D& t) {
    json rows = json::array();
    for (int i = 0; i < 3; ++i) rows.push_back(vec_json(Vec3(t.rotation.row(i).transpose())));
    return {{"translation", vec_json(t.translation)}, {"rotation", rows}};
}

inline void require(bool ok, const std::string& field, const std::string& why) {
    if (!ok) throw Error(ErrorKind::validation_error, field + " " + why);
}

inline FireTarget read_target(const json& j, const BuildingLayout& layout, std::size_t idx) {
    const std::string p = "targets[" + std::to_string(idx) + "].";
    FireTarget t;
    if (j.contains("element_center")) {
        t.element_center = read_transform(j["element_center"], p + "element_center");
    } else if (j.contains("position")) {
        require(j.contains("normal"), p + "normal", "is required with position");
        t.element_center = element_frame(read_vec3(j["position"], p + "position"), read_vec2(j["normal"], p + "normal"));
    } else {
        int wall = 0;
        double offset = 0.0, height = 1.0;
        read_field(j, "wall", wall, p);
        read_field(j, "offset", offset, p);
        read_field(j, "height", height, p);
        require(wall >= 0 && static_cast<std::size_t>(wall) < layout.outer_walls.size(), p + "wall", "out of range");
        t.element_center = wall_target(layout, wall, offset, height).element_center;
    }
    read_field(j, "element_width", t.element_width, p);
    read_field(j, "element_height", t.element_height, p);
    read_field(j, "setpoint_temp", t.setpoint_temp, p);
    read_field(j, "emissivity", t.emissivity, p);
    read_field(j, "front_plate_offset", t.front_plate_offset, p);
    read_field(j, "aperture_diameter", t.aperture_diameter, p);
    read_field(j, "front_plate_size", t.front_plate_size, p);
    read_field(j, "extinguished", t.extinguished, p);
    read_field(j, "liters_required", t.liters_required, p);
    return t;
}

inline std::string loop_name(SearchLoop l) { return l == SearchLoop::outer_walls ? "outer_walls" : "pedestal"; }

}  // namespace detail

/// Checks every type invariant; throws validation-error naming the field.
inline void validate_scenario(const Scenario& s) {
    using detail::require;
    const BuildingLayout& l = s.layout;
    require(l.outer_walls.size() >= 3, "layout.walls", "needs at least three walls");
    for (std::size_t i = 0; i < l.outer_walls.size(); ++i) {
        const WallSegment& w = l.outer_walls[i];
        const std::string f = "layout.walls[" + std::to_string(i) + "]";
        require(w.length() > 0.0, f, "has coincident endpoints");
        require(w.height > 0.0, f + ".height", "must be positive");
    }
    for (std::size_t i = 0; i < l.door_gaps.size(); ++i) {
        const DoorGap& g = l.door_gaps[i];
        const std::string f = "layout.door_gaps[" + std::to_string(i) + "]";
        require(g.wall_index >= 0 && static_cast<std::size_t>(g.wall_index) < l.outer_walls.size(), f + ".wall",
                "out of range");
        require(g.width > s.robot.footprint_width, f + ".width", "must exceed the robot width");
        const double len = l.outer_walls[static_cast<std::size_t>(g.wall_index)].length();
        require(g.offset - g.width / 2.0 >= 0.0 && g.offset + g.width / 2.0 <= len, f + ".offset",
                "places the gap outside its wall");
    }
    const auto outer = outer_loop_polygon(l);
    for (const Vec2& p : l.pedestal) {
        require(point_in_polygon(outer, p), "layout.pedestal", "must lie strictly inside the outer walls");
    }
    require(l.pedestal.empty() || l.pedestal.size() >= 3, "layout.pedestal", "needs at least three vertices");
    require(l.pedestal.empty() || l.pedestal_height > 0.0, "layout.pedestal_height", "must be positive");

    require(!s.targets.empty(), "targets", "must contain at least one target");
    for (std::size_t i = 0; i < s.targets.size(); ++i) {
        const FireTarget& t = s.targets[i];
        const std::string f = "targets[" + std::to_string(i) + "].";
        require(t.emissivity > 0.0 && t.emissivity <= 1.0, f + "emissivity", "must lie in (0, 1]");
        require(t.aperture_diameter > 0.0, f + "aperture_diameter", "must be positive");
        require(t.front_plate_offset > 0.0, f + "front_plate_offset", "must be positive");
        require(t.front_plate_size > t.aperture_diameter, f + "front_plate_size", "must exceed the aperture");
        require(t.element_width > 0.0 && t.element_height > 0.0, f + "element size", "must be positive");
        require(t.liters_required > 0.0, f + "liters_required", "must be positive");
        require(t.setpoint_temp > -kZeroCelsius, f + "setpoint_temp", "below absolute zero");
        require(t.element_center.is_valid(), f + "element_center", "is not a rigid transform");
    }

    const RobotParams& r = s.robot;
    require(r.max_speed_outdoor > 0.0, "robot.max_speed_outdoor", "must be positive");
    require(r.max_speed_indoor > 0.0, "robot.max_speed_indoor", "must be positive");
    require(r.max_linear_arm_speed > 0.0, "robot.max_linear_arm_speed", "must be positive");
    require(r.footprint_length > 0.0 && r.footprint_width > 0.0, "robot.footprint", "must be positive");
    require(r.link_lengths.size() == 4, "robot.link_lengths", "must list four links");
    double sum = 0.0;
    for (double x : r.link_lengths) {
        require(x > 0.0, "robot.link_lengths", "must be positive");
        sum += x;
    }
    require(std::abs(sum - r.reach) <= 1e-6, "robot.reach", "must equal the sum of link lengths");
    require(r.inflation_radius() >= r.half_diagonal() - 1e-12, "robot.footprint",
            "half-diagonal exceeds the inflation radius (half-width + 0.1 m)");

    const WaterSystemParams& w = s.water;
    require(w.tank_volume > 0.0, "water.tank_volume", "must be positive");
    require(w.pump_pressure > 0.0, "water.pump_pressure", "must be positive");
    require(w.nozzle_diameter > 0.0, "water.nozzle_diameter", "must be positive");
    require(w.water_density > 0.0, "water.water_density", "must be positive");

    const DriftParams& d = s.drift;
    require(d.sigma_t >= 0.0, "drift.sigma_t", "must be non-negative");
    require(d.sigma_r >= 0.0, "drift.sigma_r", "must be non-negative");

    const MissionParams& m = s.mission;
    require(m.detection_threshold > s.ambient_temp + 10.0, "mission.detection_threshold",
            "must exceed ambient by more than 10 C");
    require(m.min_blob_pixels >= 1, "mission.min_blob_pixels", "must be at least 1");
    require(m.standoff > r.inflation_radius(), "mission.standoff", "must exceed the inflation radius");
    require(m.waypoint_spacing > 0.0, "mission.waypoint_spacing", "must be positive");
    require(m.pump_cycle > 0.0, "mission.pump_cycle", "must be positive");
    require(m.wiggle_amplitude >= 0.0 && m.wiggle_period > 0.0, "mission.wiggle", "needs amplitude >= 0, period > 0");
    require(m.global_timeout > 0.0, "mission.global_timeout", "must be positive");
    require(s.ambient_temp > -kZeroCelsius, "ambient_temp", "below absolute zero");
}

/// Parses and validates a scenario document.
inline Scenario load_scenario(std::string_view text) {
    using detail::json;
    using detail::read_field;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::parse_error, e.what());
    }
    if (!j.is_object()) throw Error(ErrorKind::parse_error, "scenario document must be a JSON object");

    Scenario s = default_scenario();
    try {
        std::int64_t seed = 0;
        read_field(j, "seed", seed, "");
        detail::require(seed >= 0, "seed", "must be non-negative");
        s.seed = static_cast<std::uint64_t>(seed);
        read_field(j, "ambient_temp", s.ambient_temp, "");
        read_field(j, "fine_alignment", s.fine_alignment_enabled, "");
        if (j.contains("waypoint_source")) {
            const std::string src = j["waypoint_source"].get<std::string>();
            if (src == "hand") s.waypoint_source = WaypointSource::hand_set;
            else if (src == "extracted") s.waypoint_source = WaypointSource::extracted;
            else throw Error(ErrorKind::validation_error, "waypoint_source must be hand or extracted");
        }
        if (j.contains("start_pose")) {
            const json& p = j["start_pose"];
            detail::require(p.is_array() && p.size() == 3, "start_pose", "must be [x, y, heading]");
            s.start_pose = Pose2D(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
        }

        if (j.contains("layout")) {
            const json& l = j["layout"];
            if (l.contains("walls")) {
                s.layout.outer_walls.clear();
                for (const json& w : l["walls"]) {
                    WallSegment seg;
                    seg.p0 = detail::read_vec2(w.at("p0"), "layout.walls.p0");
                    seg.p1 = detail::read_vec2(w.at("p1"), "layout.walls.p1");
                    read_field(w, "height", seg.height, "layout.walls.");
                    s.layout.outer_walls.push_back(seg);
                }
            }
            if (l.contains("door_gaps")) {
                s.layout.door_gaps.clear();
                for (const json& g : l["door_gaps"]) {
                    DoorGap gap;
                    read_field(g, "wall", gap.wall_index, "layout.door_gaps.");
                    read_field(g, "offset", gap.offset, "layout.door_gaps.");
                    read_field(g, "width", gap.width, "layout.door_gaps.");
                    s.layout.door_gaps.push_back(gap);
                }
            }
            if (l.contains("pedestal")) {
                s.layout.pedestal.clear();
                for (const json& p : l["pedestal"]) s.layout.pedestal.push_back(detail::read_vec2(p, "layout.pedestal"));
            }
            read_field(l, "pedestal_height", s.layout.pedestal_height, "layout.");
        }

        if (j.contains("targets")) {
            s.targets.clear();
            std::size_t i = 0;
            for (const json& t : j["targets"]) s.targets.push_back(detail::read_target(t, s.layout, i++));
        } else {
            s.targets = {wall_target(s.layout, 2, 3.0, 1.0)};
        }

        if (j.contains("robot")) {
            const json& r = j["robot"];
            RobotParams& rp = s.robot;
            read_field(r, "footprint_length", rp.footprint_length, "robot.");
            read_field(r, "footprint_width", rp.footprint_width, "robot.");
            read_field(r, "body_height", rp.body_height, "robot.");
            read_field(r, "max_speed_outdoor", rp.max_speed_outdoor, "robot.");
            read_field(r, "max_speed_indoor", rp.max_speed_indoor, "robot.");
            read_field(r, "max_yaw_rate", rp.max_yaw_rate, "robot.");
            read_field(r, "link_lengths", rp.link_lengths, "robot.");
            read_field(r, "reach", rp.reach, "robot.");
            read_field(r, "max_linear_arm_speed", rp.max_linear_arm_speed, "robot.");
            if (r.contains("arm_mount")) rp.arm_mount = detail::read_transform(r["arm_mount"], "robot.arm_mount");
            if (r.contains("thermal_to_depth"))
                rp.thermal_to_depth = detail::read_transform(r["thermal_to_depth"], "robot.thermal_to_depth");
            if (r.contains("nozzle_offset"))
                rp.nozzle_offset = detail::read_transform(r["nozzle_offset"], "robot.nozzle_offset");
        }

        if (j.contains("sensors")) {
            const json& x = j["sensors"];
            SensorParams& sp = s.sensors;
            read_field(x, "thermal_width", sp.thermal_width, "sensors.");
            read_field(x, "thermal_height", sp.thermal_height, "sensors.");
            read_field(x, "thermal_hfov", sp.thermal_hfov, "sensors.");
            read_field(x, "thermal_dfov", sp.thermal_dfov, "sensors.");
            read_field(x, "thermal_rate", sp.thermal_rate, "sensors.");
            read_field(x, "thermal_noise", sp.thermal_noise, "sensors.");
            read_field(x, "depth_width", sp.depth_width, "sensors.");
            read_field(x, "depth_height", sp.depth_height, "sensors.");
            read_field(x, "depth_hfov", sp.depth_hfov, "sensors.");
            read_field(x, "depth_vfov", sp.depth_vfov, "sensors.");
            read_field(x, "depth_rate", sp.depth_rate, "sensors.");
            read_field(x, "depth_noise", sp.depth_noise, "sensors.");
            read_field(x, "depth_min", sp.depth_min, "sensors.");
            read_field(x, "depth_max", sp.depth_max, "sensors.");
            read_field(x, "scan_beams", sp.scan_beams, "sensors.");
            read_field(x, "scan_rings", sp.scan_rings, "sensors.");
            read_field(x, "scan_vfov", sp.scan_vfov, "sensors.");
            read_field(x, "scan_rate", sp.scan_rate, "sensors.");
            read_field(x, "scan_noise", sp.scan_noise, "sensors.");
            read_field(x, "scan_max", sp.scan_max, "sensors.");
            read_field(x, "lidar_height", sp.lidar_height, "sensors.");
        }

        if (j.contains("water")) {
            const json& w = j["water"];
            read_field(w, "tank_volume", s.water.tank_volume, "water.");
            read_field(w, "pump_pressure", s.water.pump_pressure, "water.");
            read_field(w, "nozzle_diameter", s.water.nozzle_diameter, "water.");
            read_field(w, "min_reach", s.water.min_reach, "water.");
            read_field(w, "water_density", s.water.water_density, "water.");
        }

        if (j.contains("drift")) {
            const json& d = j["drift"];
            read_field(d, "sigma_t", s.drift.sigma_t, "drift.");
            read_field(d, "sigma_r", s.drift.sigma_r, "drift.");
            if (d.contains("bias")) s.drift.bias = detail::read_vec2(d["bias"], "drift.bias");
        }

        if (j.contains("mission")) {
            const json& m = j["mission"];
            MissionParams& mp = s.mission;
            read_field(m, "detection_threshold", mp.detection_threshold, "mission.");
            read_field(m, "min_blob_pixels", mp.min_blob_pixels, "mission.");
            read_field(m, "standoff", mp.standoff, "mission.");
            read_field(m, "waypoint_spacing", mp.waypoint_spacing, "mission.");
            if (m.contains("search_loops")) {
                mp.search_loops.clear();
                for (const json& x : m["search_loops"]) {
                    const std::string name = x.get<std::string>();
                    if (name == "outer_walls") mp.search_loops.push_back(SearchLoop::outer_walls);
                    else if (name == "pedestal") mp.search_loops.push_back(SearchLoop::pedestal);
                    else throw Error(ErrorKind::validation_error, "mission.search_loops has unknown loop " + name);
                }
            }
            read_field(m, "hand_waypoint_error", mp.hand_waypoint_error, "mission.");
            read_field(m, "pump_cycle", mp.pump_cycle, "mission.");
            read_field(m, "fine_align_timeout", mp.fine_align_timeout, "mission.");
            read_field(m, "global_timeout", mp.global_timeout, "mission.");
            read_field(m, "refill_enabled", mp.refill_enabled, "mission.");
            if (m.contains("wiggle_pattern")) {
                const std::string name = m["wiggle_pattern"].get<std::string>();
                if (name == "raster") mp.wiggle_pattern = WigglePatternType::raster;
                else if (name == "quadrature") mp.wiggle_pattern = WigglePatternType::quadrature;
                else throw Error(ErrorKind::validation_error, "mission.wiggle_pattern must be raster or quadrature");
            }
            read_field(m, "wiggle_amplitude", mp.wiggle_amplitude, "mission.");
            read_field(m, "wiggle_period", mp.wiggle_period, "mission.");
            read_field(m, "tol_lateral", mp.tol_lateral, "mission.");
            read_field(m, "tol_elevation", mp.tol_elevation, "mission.");
            read_field(m, "horizontal_gain", mp.horizontal_gain, "mission.");
            read_field(m, "vertical_gain", mp.vertical_gain, "mission.");
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::validation_error, e.what());
    }

    validate_scenario(s);
    return s;
}

inline Scenario load_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io_error, "cannot read scenario file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_scenario(ss.str());
}

inline nlohmann::json scenario_to_json(const Scenario& s) {
    using detail::json;
    using detail::transform_json;
    using detail::vec_json;
    json j;
    j["seed"] = s.seed;
    j["ambient_temp"] = s.ambient_temp;
    j["fine_alignment"] = s.fine_alignment_enabled;
    j["waypoint_source"] = s.waypoint_source == WaypointSource::hand_set ? "hand" : "extracted";
    j["start_pose"] = json::array({s.start_pose.x, s.start_pose.y, s.start_pose.heading});

    json walls = json::array();
    for (const WallSegment& w : s.layout.outer_walls) {
        walls.push_back({{"p0", vec_json(w.p0)}, {"p1", vec_json(w.p1)}, {"height", w.height}});
    }
    json gaps = json::array();
    for (const DoorGap& g : s.layout.door_gaps) {
        gaps.push_back({{"wall", g.wall_index}, {"offset", g.offset}, {"width", g.width}});
    }
    json ped = json::array();
    for (const Vec2& p : s.layout.pedestal) ped.push_back(vec_json(p));
    j["layout"] = {{"walls", walls}, {"door_gaps", gaps}, {"pedestal", ped},
                   {"pedestal_height", s.layout.pedestal_height}};

    json targets = json::array();
    for (const FireTarget& t : s.targets) {
        targets.push_back({{"element_center", transform_json(t.element_center)},
                           {"element_width", t.element_width},
                           {"element_height", t.element_height},
                           {"setpoint_temp", t.setpoint_temp},
                           {"emissivity", t.emissivity},
                           {"front_plate_offset", t.front_plate_offset},
                           {"aperture_diameter", t.aperture_diameter},
                           {"front_plate_size", t.front_plate_size},
                           {"extinguished", t.extinguished},
                           {"liters_required", t.liters_required}});
    }
    j["targets"] = targets;

    const RobotParams& r = s.robot;
    j["robot"] = {{"footprint_length", r.footprint_length},
                  {"footprint_width", r.footprint_width},
                  {"body_height", r.body_height},
                  {"max_speed_outdoor", r.max_speed_outdoor},
                  {"max_speed_indoor", r.max_speed_indoor},
                  {"max_yaw_rate", r.max_yaw_rate},
                  {"link_lengths", r.link_lengths},
                  {"reach", r.reach},
                  {"max_linear_arm_speed", r.max_linear_arm_speed},
                  {"arm_mount", transform_json(r.arm_mount)},
                  {"thermal_to_depth", transform_json(r.thermal_to_depth)},
                  {"nozzle_offset", transform_json(r.nozzle_offset)}};

    const SensorParams& x = s.sensors;
    j["sensors"] = {{"thermal_width", x.thermal_width}, {"thermal_height", x.thermal_height},
                    {"thermal_hfov", x.thermal_hfov},   {"thermal_dfov", x.thermal_dfov},
                    {"thermal_rate", x.thermal_rate},   {"thermal_noise", x.thermal_noise},
                    {"depth_width", x.depth_width},     {"depth_height", x.depth_height},
                    {"depth_hfov", x.depth_hfov},       {"depth_vfov", x.depth_vfov},
                    {"depth_rate", x.depth_rate},       {"depth_noise", x.depth_noise},
                    {"depth_min", x.depth_min},         {"depth_max", x.depth_max},
                    {"scan_beams", x.scan_beams},       {"scan_rings", x.scan_rings},
                    {"scan_vfov", x.scan_vfov},         {"scan_rate", x.scan_rate},
                    {"scan_noise", x.scan_noise},       {"scan_max", x.scan_max},
                    {"lidar_height", x.lidar_height}};

    j["water"] = {{"tank_volume", s.water.tank_volume},
                  {"pump_pressure", s.water.pump_pressure},
                  {"nozzle_diameter", s.water.nozzle_diameter},
                  {"min_reach", s.water.min_reach},
                  {"water_density", s.water.water_density}};
    j["drift"] = {{"sigma_t", s.drift.sigma_t}, {"sigma_r", s.drift.sigma_r}, {"bias", vec_json(s.drift.bias)}};

    const MissionParams& m = s.mission;
    json loops = json::array();
    for (SearchLoop l : m.search_loops) loops.push_back(detail::loop_name(l));
    j["mission"] = {{"detection_threshold", m.detection_threshold},
                    {"min_blob_pixels", m.min_blob_pixels},
                    {"standoff", m.standoff},
                    {"waypoint_spacing", m.waypoint_spacing},
                    {"search_loops", loops},
                    {"hand_waypoint_error", m.hand_waypoint_error},
                    {"pump_cycle", m.pump_cycle},
                    {"fine_align_timeout", m.fine_align_timeout},
                    {"global_timeout", m.global_timeout},
                    {"refill_enabled", m.refill_enabled},
                    {"wiggle_pattern", m.wiggle_pattern == WigglePatternType::raster ? "raster" : "quadrature"},
                    {"wiggle_amplitude", m.wiggle_amplitude},
                    {"wiggle_period", m.wiggle_period},
                    {"tol_lateral", m.tol_lateral},
                    {"tol_elevation", m.tol_elevation},
                    {"horizontal_gain", m.horizontal_gain},
                    {"vertical_gain", m.vertical_gain}};
    return j;
}

inline std::string serialize_scenario(const Scenario& s) { return scenario_to_json(s).dump(2); }

}  // namespace firebot
