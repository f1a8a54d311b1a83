#pragma once

// The firefighting mission: navigation block (outdoor route, door, wall
// following search) followed by the extinguishing block (abate pose, wall
// alignment, fine alignment, pump cycle, recheck).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "firebot/arm.hpp"
#include "firebot/error.hpp"
#include "firebot/geometry.hpp"
#include "firebot/mapping.hpp"
#include "firebot/perception.hpp"
#include "firebot/raycast.hpp"
#include "firebot/rng.hpp"
#include "firebot/sensors.hpp"
#include "firebot/state_machine.hpp"
#include "firebot/suppression.hpp"
#include "firebot/world.hpp"

namespace firebot {

namespace state {
inline const std::string outdoor_nav = "OutdoorNav";
inline const std::string door_traverse = "DoorTraverse";
inline const std::string indoor_search = "IndoorSearch";
inline const std::string abate_pose = "AbatePose";
inline const std::string wall_align = "WallAlign";
inline const std::string fine_align = "FineAlign";
inline const std::string pump_cycle = "PumpCycle";
inline const std::string recheck = "Recheck";
inline const std::string refill = "Refill";
inline const std::string done = "MissionDone";
inline const std::string failed = "MissionFailed";
}  // namespace state

struct TrajectorySample {
    double t = 0.0;
    Pose2D true_pose;
    Pose2D estimated_pose;
};

struct MissionStats {
    std::map<std::string, double> max_speed;  // per state, m/s
    int thermal_frames = 0;
    int detection_frames = 0;
    int target_estimates = 0;
    int waypoints_completed = 0;
    int indoor_waypoints_completed = 0;
    int collisions = 0;
    int pump_cycles = 0;
    int arm_pose_violations = 0;
    int aborted_targets = 0;
    std::vector<double> pump_cycle_durations;
    std::vector<double> estimate_times;  // thermal frame time of each fused target estimate
    std::string failure_reason;
};

struct MissionContext {
    Scenario scn;
    std::unique_ptr<Scene> scene;
    std::unique_ptr<FootprintChecker> footprint;
    ArmModel arm;
    const SimClock* clock = nullptr;
    std::string current_state;
    double state_entered = 0.0;

    // motion
    OdometryState odo;
    std::mt19937_64 odo_rng;
    VelocityCommand cmd;
    double stuck_time = 0.0;

    // arm
    JointState q{};
    std::optional<JointTrajectory> arm_motion;
    double arm_motion_start = 0.0;

    // water
    PumpState pump;
    DeliveryLedger ledger;
    double v_exit = 0.0;

    // planning
    std::optional<OccupancyGrid> grid;
    bool scan_grid = false;  // grid built from planar scans instead of the layout
    std::vector<Waypoint> outdoor_route;
    std::vector<Waypoint> door_route;
    std::vector<WaypointList> loops;
    std::size_t loop_index = 0;
    std::size_t loop_waypoint = 0;  // next waypoint of the current loop
    bool loop_active = false;
    PathTracker tracker;
    std::size_t tracker_loop_offset = 0;  // tracker path index of loop waypoint `loop_waypoint`
    bool tracker_in_loop = false;
    bool plan_failed = false;
    bool layout_ready = false;
    std::optional<BuildingLayout> extracted_layout;
    std::optional<LayoutEstimate> layout_estimate;

    // sensing cadence
    std::uint64_t next_thermal = 0;
    std::uint64_t next_scan = 0;
    std::uint64_t scan_frames = 0;
    std::uint64_t thermal_frames = 0;

    // search and aiming
    int side = 1;  // +1 camera on the left, -1 on the right
    double detection_cooldown_until = -1.0;  // odometer reading
    std::optional<double> first_detection_offset;
    std::optional<WallAligner> wall_aligner;
    HorizontalAligner horizontal;
    TargetWatchdog watchdog;
    int wall_align_attempts = 0;
    JointState q_aligned{};
    double pump_started = 0.0;
    bool have_aim = false;
    std::optional<TargetEstimate> latest_estimate;
    WigglePattern wiggle;

    // output
    MissionStats stats;
    std::vector<TrajectorySample> trajectory;
    std::optional<std::filesystem::path> dump_dir;

    double now() const { return clock ? clock->now() : 0.0; }
    double dt() const { return clock ? clock->dt : 0.01; }

    void on_transition(const Event& e) {
        current_state = e.to;
        state_entered = e.time;
    }
};

namespace detail {

inline Transform3D true_base(const MissionContext& c) { return Transform3D::from_pose2d(c.odo.true_pose); }
inline Transform3D estimated_base(const MissionContext& c) { return Transform3D::from_pose2d(c.odo.estimated_pose); }

inline bool arm_busy(MissionContext& c) {
    if (!c.arm_motion) return false;
    const double t = c.now() - c.arm_motion_start;
    c.q = c.arm_motion->at(t);
    if (t >= c.arm_motion->duration) {
        c.q = c.arm_motion->states.back();
        c.arm_motion.reset();
        return false;
    }
    return true;
}

inline void move_arm_to(MissionContext& c, const JointState& goal) {
    if (c.q == goal) return;
    c.arm_motion = plan_joint_trajectory(c.arm, c.q, goal, c.arm.max_joint_speed);
    c.arm_motion_start = c.now();
}

// true only on the tick a new frame arrives; frames nobody asks for are dropped
inline bool thermal_due(MissionContext& c) {
    const double rate = c.scn.sensors.thermal_rate;
    const auto frame_at = [&](double t) { return static_cast<std::int64_t>(std::floor(t * rate + 1e-9)); };
    const std::int64_t k = frame_at(c.now());
    if (k < static_cast<std::int64_t>(c.next_thermal) || frame_at(c.now() - c.dt()) >= k) return false;
    c.thermal_frames = static_cast<std::uint64_t>(k);
    c.next_thermal = c.thermal_frames + 1;
    return true;
}

inline bool scan_due(MissionContext& c) {
    const double rate = c.scn.sensors.scan_rate;
    if (c.now() + 1e-9 < static_cast<double>(c.next_scan) / rate) return false;
    c.next_scan = static_cast<std::uint64_t>(std::floor(c.now() * rate + 1e-9)) + 1;
    return true;
}

inline Scan2D take_scan(MissionContext& c) {
    Scan2D s = simulate_scan2d(c.scn, c.odo.true_pose, c.scan_frames++);
    s.timestamp = c.now();
    return s;
}

inline std::vector<HotspotDetection> sense_thermal(MissionContext& c) {
    const Transform3D cam = true_base(c) * thermal_camera_pose(c.arm, c.q);
    const double ts = static_cast<double>(c.thermal_frames) / c.scn.sensors.thermal_rate;
    ThermalImage img = render_thermal(c.scn, *c.scene, cam, c.thermal_frames, ts, true);
    auto dets = detect_hotspots(img, thermal_intrinsics(c.scn.sensors), c.scn.mission.detection_threshold,
                                c.scn.mission.min_blob_pixels);
    ++c.stats.thermal_frames;
    if (!dets.empty()) ++c.stats.detection_frames;
    if (c.dump_dir && (!dets.empty() || c.thermal_frames % 10 == 0)) {
        std::ofstream f(*c.dump_dir / ("thermal_" + std::to_string(c.thermal_frames) + ".pgm"), std::ios::binary);
        write_pgm(f, img, c.scn.ambient_temp - 5.0, 1000.0);
    }
    return dets;
}

/// Fuses a detection with the depth frame closest in time. Only the pixels
/// along the detection's epipolar line are rendered.
inline std::optional<TargetEstimate> fuse(MissionContext& c, const HotspotDetection& det) {
    const SensorParams& sp = c.scn.sensors;
    const std::uint64_t frame = static_cast<std::uint64_t>(std::llround(det.timestamp * sp.depth_rate));
    const double ts = static_cast<double>(frame) / sp.depth_rate;
    const PinholeIntrinsics k = depth_intrinsics(sp);
    const Transform3D depth_from_thermal = invert(c.arm.thermal_to_depth);
    const PixelWindow win = ray_window(det, depth_from_thermal, k);
    const Transform3D cam = true_base(c) * thermal_camera_pose(c.arm, c.q) * c.arm.thermal_to_depth;
    const DepthImage depth = render_depth_window(c.scn, cam, frame, win, ts);
    try {
        TargetEstimate est = localize_target(det, depth, depth_from_thermal, k);
        ++c.stats.target_estimates;
        c.stats.estimate_times.push_back(est.timestamp);
        return est;
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::no_depth || e.kind() == ErrorKind::out_of_frustum) return std::nullopt;
        throw;
    }
}

inline std::vector<Vec2> with_start(const Pose2D& p, const std::vector<Pose2D>& path) {
    std::vector<Vec2> pts{p.position()};
    for (std::size_t i = 1; i < path.size(); ++i) pts.push_back(path[i].position());
    if (path.size() == 1 && (path[0].position() - p.position()).norm() > 1e-9) pts.push_back(path[0].position());
    return pts;
}

/// A* from the estimated pose through each goal in turn.
inline std::vector<Vec2> plan_through(MissionContext& c, const std::vector<Pose2D>& goals) {
    const OccupancyGrid& g = *c.grid;
    Pose2D from = c.odo.estimated_pose;
    std::vector<Vec2> pts{from.position()};
    if (g.blocked(from.position())) {
        const auto free = nearest_free(g, from.position(), 0.8);
        if (!free) throw Error(ErrorKind::no_path, "robot is boxed in");
        from = Pose2D(free->x(), free->y(), from.heading);
        pts.push_back(*free);
    }
    for (const Pose2D& goal : goals) {
        const PlannedPath p = plan_path(g, from, goal);
        for (std::size_t i = 1; i < p.poses.size(); ++i) pts.push_back(p.poses[i].position());
        from = goal;
    }
    if (pts.size() == 1) pts.push_back(pts.front());
    return pts;
}

inline PursuitCommand follow(MissionContext& c, double lookahead, double cap) {
    return c.tracker.step(c.odo.estimated_pose, lookahead, cap, c.scn.robot.max_yaw_rate);
}

inline double speed_cap(const MissionContext& c) {
    return c.current_state == state::outdoor_nav ? c.scn.robot.max_speed_outdoor : c.scn.robot.max_speed_indoor;
}

// ---------------------------------------------------------------- setup

/// Prior survey: 3D sweeps from around and inside the building, merged in
/// the world frame.
inline std::vector<Vec3> survey_cloud(const Scenario& s) {
    Vec2 lo(1e300, 1e300), hi(-1e300, -1e300);
    for (const auto& w : s.layout.outer_walls) {
        lo = lo.cwiseMin(w.p0);
        hi = hi.cwiseMax(w.p0);
    }
    const Vec2 span = hi - lo;
    std::vector<Vec2> spots{{lo.x() - 3.0, lo.y() - 3.0}, {hi.x() + 3.0, lo.y() - 3.0}, {hi.x() + 3.0, hi.y() + 3.0},
                            {lo.x() - 3.0, hi.y() + 3.0}, s.start_pose.position()};
    for (double fx : {0.2, 0.8}) {
        for (double fy : {0.2, 0.8}) {
            const Vec2 p = lo + Vec2(fx * span.x(), fy * span.y());
            if (s.layout.pedestal.size() < 3 || !point_in_polygon(s.layout.pedestal, p)) spots.push_back(p);
        }
    }
    std::vector<Vec3> cloud;
    std::uint64_t frame = 1u << 20;
    for (const Vec2& p : spots) {
        const Pose2D pose(p.x(), p.y(), 0.0);
        for (const Vec3& q : simulate_scan3d(s, pose, frame++)) {
            const Vec2 w = pose.to_world(q.head<2>());
            cloud.emplace_back(w.x(), w.y(), q.z());
        }
    }
    // collapse points that land in the same 2 cm column and height band
    std::map<std::tuple<long, long, int>, Vec3> cells;
    for (const Vec3& q : cloud) {
        const auto key = std::make_tuple(std::lround(q.x() / 0.02), std::lround(q.y() / 0.02), q.z() >= 0.3 && q.z() <= 2.5);
        cells.emplace(key, q);
    }
    std::vector<Vec3> out;
    out.reserve(cells.size());
    for (const auto& [k, q] : cells) out.push_back(q);
    return out;
}

inline const DoorGap& nearest_gap(const BuildingLayout& b, const Vec2& p) {
    if (b.door_gaps.empty()) throw Error(ErrorKind::no_path, "layout has no door");
    const DoorGap* best = &b.door_gaps.front();
    for (const auto& g : b.door_gaps) {
        if ((gap_center(b, g) - p).norm() < (gap_center(b, *best) - p).norm()) best = &g;
    }
    return *best;
}

inline std::vector<WaypointList> search_loops(const MissionContext& c, const BuildingLayout& b) {
    std::vector<WaypointList> loops;
    for (SearchLoop l : c.scn.mission.search_loops) {
        if (l == SearchLoop::outer_walls) {
            loops.push_back(generate_wall_following_waypoints(b, c.scn.mission.standoff, CameraSide::left,
                                                              c.scn.mission.waypoint_spacing));
        } else if (b.pedestal.size() >= 3) {
            loops.push_back(generate_pedestal_waypoints(b, c.scn.mission.standoff, c.scn.mission.waypoint_spacing));
        }
    }
    return loops;
}

inline void prepare_layout(MissionContext& c) {
    if (c.layout_ready) return;
    c.layout_ready = true;
    const Scenario& s = c.scn;
    const double inflation = s.robot.inflation_radius();
    if (s.waypoint_source == WaypointSource::extracted) {
        c.layout_estimate = extract_layout(survey_cloud(s), 0.8, PlaneExtractionParams{.min_inliers = 25});
        c.extracted_layout = layout_to_building(*c.layout_estimate, 3.0, s.layout.pedestal_height);
        const BuildingLayout& b = *c.extracted_layout;
        c.grid = build_occupancy_grid(b, 0.05, inflation, 3.0, {s.start_pose.position()});
        const auto door = door_waypoints(b, nearest_gap(b, s.start_pose.position()));
        c.outdoor_route = {door[0]};
        c.door_route = {door[1], door[2]};
        c.loops = search_loops(c, b);
    } else {
        // coordinates measured by hand on the real building, each off by a fixed error
        const BuildingLayout& b = s.layout;
        c.grid = empty_grid_around(b, 0.05, inflation, 3.0, {s.start_pose.position()});
        c.scan_grid = true;
        std::mt19937_64 rng = make_rng(s.seed, Stream::waypoints);
        const double err = s.mission.hand_waypoint_error;
        const auto door = perturb_waypoints(door_waypoints(b, nearest_gap(b, s.start_pose.position())), err, rng);
        c.outdoor_route = {door[0]};
        c.door_route = {door[1], door[2]};
        for (WaypointList l : search_loops(c, b)) {
            l.waypoints = perturb_waypoints(l.waypoints, err, rng);
            c.loops.push_back(l);
        }
        integrate_scan(*c.grid, c.odo.estimated_pose, take_scan(c));
    }
}

// ---------------------------------------------------------------- states

inline void enter_outdoor(MissionContext& c) {
    c.plan_failed = false;
    c.stuck_time = 0.0;
    try {
        prepare_layout(c);
        c.tracker = PathTracker(plan_through(c, {c.outdoor_route.front().pose}));
    } catch (const Error& e) {
        c.plan_failed = true;
        c.stats.failure_reason = std::string("outdoor: ") + e.what();
    }
}

inline std::optional<std::string> tick_outdoor(MissionContext& c) {
    if (c.plan_failed || c.stuck_time > 5.0) return "failed";
    if (c.q != named_pose(NamedPose::folded)) ++c.stats.arm_pose_violations;
    const PursuitCommand pc = follow(c, 1.0, c.scn.robot.max_speed_outdoor);
    c.cmd = {pc.v, pc.omega};
    if (pc.reached) {
        ++c.stats.waypoints_completed;
        return "arrived";
    }
    return std::nullopt;
}

inline void enter_door(MissionContext& c) {
    c.plan_failed = false;
    c.stuck_time = 0.0;
    try {
        c.tracker = PathTracker(plan_through(c, {c.door_route[0].pose, c.door_route[1].pose}));
    } catch (const Error& e) {
        c.plan_failed = true;
        c.stats.failure_reason = std::string("door: ") + e.what();
    }
}

inline std::optional<std::string> tick_door(MissionContext& c) {
    if (c.plan_failed) return "failed";
    if (c.stuck_time > 5.0) {
        c.stats.failure_reason = "door: stuck against the door frame";
        return "failed";
    }
    const PursuitCommand pc = follow(c, 0.6, c.scn.robot.max_speed_indoor);
    c.cmd = {pc.v, pc.omega};
    if (pc.reached) {
        c.stats.waypoints_completed += 2;
        c.stats.indoor_waypoints_completed += 1;
        return "entered";
    }
    return std::nullopt;
}

inline void start_loop_leg(MissionContext& c) {
    const WaypointList& loop = c.loops[c.loop_index];
    c.side = loop.camera_side == CameraSide::left ? 1 : -1;
    std::vector<Vec2> pts;
    if (!c.loop_active) {
        // join the loop at the waypoint nearest to the robot
        const WaypointList rotated = start_loop_near(loop, c.odo.estimated_pose.position());
        c.loops[c.loop_index] = rotated;
        c.loop_waypoint = 0;
        c.loop_active = true;
    }
    const auto& wps = c.loops[c.loop_index].waypoints;
    pts = plan_through(c, {wps[c.loop_waypoint].pose});
    c.tracker_loop_offset = pts.size() - 1;
    for (std::size_t i = c.loop_waypoint + 1; i < wps.size(); ++i) pts.push_back(wps[i].pose.position());
    c.tracker = PathTracker(pts);
    c.tracker_in_loop = true;
}

inline void enter_search(MissionContext& c) {
    c.stuck_time = 0.0;
    c.plan_failed = false;
    c.first_detection_offset.reset();
    c.latest_estimate.reset();
    c.tracker_in_loop = false;
    if (c.loop_index < c.loops.size()) {
        c.side = c.loops[c.loop_index].camera_side == CameraSide::left ? 1 : -1;
    }
    try {
        move_arm_to(c, named_pose(NamedPose::raised, c.side));
    } catch (const Error& e) {
        c.plan_failed = true;
        c.stats.failure_reason = std::string("search arm: ") + e.what();
    }
}

inline std::optional<std::string> tick_search(MissionContext& c) {
    c.cmd = {};
    if (c.plan_failed) return "failed";
    if (arm_busy(c)) return std::nullopt;
    if (c.loop_index >= c.loops.size()) return "search_complete";
    if (c.q != named_pose(NamedPose::raised, c.side)) {
        ++c.stats.arm_pose_violations;
        move_arm_to(c, named_pose(NamedPose::raised, c.side));
        return std::nullopt;
    }
    if (!c.tracker_in_loop) {
        try {
            start_loop_leg(c);
        } catch (const Error& e) {
            c.stats.failure_reason = std::string("search: ") + e.what();
            return "failed";
        }
        if (c.q != named_pose(NamedPose::raised, c.side)) {
            move_arm_to(c, named_pose(NamedPose::raised, c.side));
            return std::nullopt;
        }
    }
    if (c.stuck_time > 5.0) {
        c.stats.failure_reason = "search: stuck";
        return "failed";
    }

    double cap = c.scn.robot.max_speed_indoor;
    if (c.first_detection_offset) cap = std::min(cap, 0.2);
    if (thermal_due(c) && c.odo.distance_travelled >= c.detection_cooldown_until) {
        const auto dets = sense_thermal(c);
        if (const auto det = select_target(dets)) {
            const double off = det->u - thermal_intrinsics(c.scn.sensors).cx;
            const bool centered = std::abs(off) <= 8.0;
            const bool passed = c.first_detection_offset && (off > 0) != (*c.first_detection_offset > 0);
            if (!c.first_detection_offset) c.first_detection_offset = off;
            if (centered || passed) return "detected";
            cap = std::min(cap, 0.2);
        } else {
            c.first_detection_offset.reset();
        }
    }

    const PursuitCommand pc = follow(c, 0.5, cap);
    c.cmd = {pc.v, pc.omega};
    // loop waypoints passed so far
    const std::size_t seg = c.tracker.segment();
    while (seg > c.tracker_loop_offset && c.loop_waypoint + 1 < c.loops[c.loop_index].waypoints.size()) {
        ++c.tracker_loop_offset;
        ++c.loop_waypoint;
        ++c.stats.waypoints_completed;
        ++c.stats.indoor_waypoints_completed;
    }
    if (pc.reached) {
        c.stats.waypoints_completed += 1;
        c.stats.indoor_waypoints_completed += 1;
        ++c.loop_index;
        c.loop_active = false;
        c.tracker_in_loop = false;
        c.cmd = {};
        if (c.loop_index < c.loops.size()) {
            c.side = c.loops[c.loop_index].camera_side == CameraSide::left ? 1 : -1;
            move_arm_to(c, named_pose(NamedPose::raised, c.side));
        }
    }
    return std::nullopt;
}

inline void enter_abate(MissionContext& c) {
    c.cmd = {};
    c.plan_failed = false;
    c.wall_align_attempts = 0;
    try {
        move_arm_to(c, named_pose(NamedPose::abate, c.side));
    } catch (const Error&) {
        c.plan_failed = true;
    }
}

inline std::optional<std::string> tick_abate(MissionContext& c) {
    c.cmd = {};
    if (c.plan_failed) return "failed";
    if (arm_busy(c)) return std::nullopt;
    return "ready";
}

inline void abort_target(MissionContext& c) {
    ++c.stats.aborted_targets;
    c.detection_cooldown_until = c.odo.distance_travelled + 1.5;
}

inline void enter_wall_align(MissionContext& c) {
    c.cmd = {};
    ++c.wall_align_attempts;
    c.wall_aligner.emplace(c.scn.mission.standoff, c.side, 0.5, 0.2);
    c.next_scan = static_cast<std::uint64_t>(std::floor(c.now() * c.scn.sensors.scan_rate + 1e-9));
}

inline std::optional<std::string> tick_wall_align(MissionContext& c) {
    if (c.wall_align_attempts > 2) {
        abort_target(c);
        return "abort";
    }
    if (!scan_due(c)) return std::nullopt;
    try {
        const WallAlignCommand w = c.wall_aligner->step(take_scan(c));
        c.cmd = {w.v, w.omega};
        if (w.aligned) {
            c.cmd = {};
            return "aligned";
        }
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::no_wall_found) throw;
        abort_target(c);
        c.cmd = {};
        return "failed";
    }
    return std::nullopt;
}

inline void enter_fine_align(MissionContext& c) {
    c.cmd = {};
    const MissionParams& m = c.scn.mission;
    c.horizontal = HorizontalAligner(m.horizontal_gain, m.tol_lateral, 3, 0.1);
    c.watchdog.reset(c.now());
    c.have_aim = false;
}

/// Heat source in the robot base frame: from the thermal/depth pipeline, or
/// with fine alignment disabled, from its a-priori map position and the
/// odometry estimate.
inline std::optional<Vec3> aim_point(MissionContext& c) {
    if (c.scn.fine_alignment_enabled) {
        const auto det = select_target(sense_thermal(c));
        if (!det) return std::nullopt;
        const auto est = fuse(c, *det);
        if (!est) return std::nullopt;
        c.latest_estimate = est;
        return apply(thermal_camera_pose(c.arm, c.q), est->position);
    }
    sense_thermal(c);
    const Transform3D base_inv = invert(estimated_base(c));
    std::optional<Vec3> best;
    double best_d = 1e300;
    for (const FireTarget& t : c.scn.targets) {
        if (t.extinguished) continue;
        const Vec3 p = apply(base_inv, t.position());
        if (p.y() * c.side <= 0.0) continue;
        const double d = p.head<2>().norm();
        if (d < best_d) {
            best_d = d;
            best = p;
        }
    }
    return best;
}

inline std::optional<std::string> tick_fine_align(MissionContext& c) {
    if (!thermal_due(c)) return std::nullopt;
    const auto target = aim_point(c);
    if (!target) {
        c.cmd = {};
        try {
            c.watchdog.check(c.now());
        } catch (const Error&) {
            return "lost";
        }
        return std::nullopt;
    }
    c.watchdog.seen(c.now());
    const AlignmentStatus st = aim_errors(nozzle_pose(c.arm, c.q), *target, c.v_exit);
    c.cmd = {c.horizontal.step(st.lateral_error), 0.0};
    const double dq = vertical_align_step(st.elevation_error, c.scn.mission.vertical_gain);
    try {
        c.q = pitch_adjust(c.arm, c.q, dq);
    } catch (const Error&) {
        return "lost";
    }
    if (c.horizontal.converged() && std::abs(st.elevation_error) <= c.scn.mission.tol_elevation) {
        c.cmd = {};
        return "aligned";
    }
    return std::nullopt;
}

inline void enter_pump(MissionContext& c) {
    c.cmd = {};
    c.q_aligned = c.q;
    c.pump.on = true;
    c.pump.elapsed_on = 0.0;
    c.pump_started = c.now();
    ++c.stats.pump_cycles;
}

inline std::optional<std::string> tick_pump(MissionContext& c) {
    c.cmd = {};
    const double t = c.now() - c.pump_started;
    c.q = c.scn.fine_alignment_enabled ? apply_wiggle(c.wiggle, c.q_aligned, std::max(0.0, t - c.dt())) : c.q_aligned;
    const Transform3D nozzle = true_base(c) * nozzle_pose(c.arm, c.q);
    const StreamResult jet = stream_impact(*c.scene, nozzle, c.v_exit);
    pump_step(c.pump, c.ledger, c.scn.targets, c.dt(), jet.crossed_target, c.now());
    if (t >= c.scn.mission.pump_cycle - 1e-9) {
        c.pump.on = false;
        c.q = c.q_aligned;
        c.stats.pump_cycle_durations.push_back(t);
        return "done";
    }
    return std::nullopt;
}

inline void enter_recheck(MissionContext& c) { c.cmd = {}; }

inline std::optional<std::string> tick_recheck(MissionContext& c) {
    c.cmd = {};
    if (!thermal_due(c)) return std::nullopt;
    if (sense_thermal(c).empty()) return "extinguished";
    if (c.pump.tank_remaining <= 0.0) {
        if (c.scn.mission.refill_enabled) return "refill";
        abort_target(c);
        return "empty";
    }
    return "still_burning";
}

inline void enter_refill(MissionContext& c) {
    c.cmd = {};
    c.odo.true_pose = c.scn.start_pose;
    c.odo.estimated_pose = c.scn.start_pose;
    c.pump.tank_remaining = c.scn.water.tank_volume;
    c.arm_motion.reset();
    c.q = named_pose(NamedPose::folded);
    c.tracker_in_loop = false;
}

inline std::optional<std::string> tick_refill(MissionContext&) { return "refilled"; }

}  // namespace detail

/// Transition table of the firefight mission.
inline TransitionTable build_firefight_mission() {
    using namespace state;
    TransitionTable t;
    t.initial = outdoor_nav;
    t.terminals = {done, failed};
    t.add(outdoor_nav, "arrived", door_traverse);
    t.add(outdoor_nav, "failed", failed);
    t.add(door_traverse, "entered", indoor_search);
    t.add(door_traverse, "failed", failed);
    t.add(indoor_search, "detected", abate_pose);
    t.add(indoor_search, "search_complete", done);
    t.add(indoor_search, "failed", failed);
    t.add(abate_pose, "ready", wall_align);
    t.add(abate_pose, "failed", indoor_search);
    t.add(wall_align, "aligned", fine_align);
    t.add(wall_align, "abort", indoor_search);
    t.add(wall_align, "failed", indoor_search);
    t.add(wall_align, "timeout", indoor_search);
    t.add(fine_align, "aligned", pump_cycle);
    t.add(fine_align, "lost", wall_align);
    t.add(fine_align, "timeout", wall_align);
    t.add(pump_cycle, "done", recheck);
    t.add(recheck, "extinguished", indoor_search);
    t.add(recheck, "still_burning", fine_align);
    t.add(recheck, "empty", indoor_search);
    t.add(recheck, "refill", refill);
    t.add(refill, "refilled", outdoor_nav);
    return t;
}

inline std::vector<StateDef<MissionContext>> firefight_states(const Scenario& s) {
    using namespace detail;
    std::vector<StateDef<MissionContext>> v;
    v.push_back({state::outdoor_nav, {"arrived", "failed"}, enter_outdoor, tick_outdoor, {}});
    v.push_back({state::door_traverse, {"entered", "failed"}, enter_door, tick_door, {}});
    v.push_back({state::indoor_search, {"detected", "search_complete", "failed"}, enter_search, tick_search, {}});
    v.push_back({state::abate_pose, {"ready", "failed"}, enter_abate, tick_abate, {}});
    v.push_back({state::wall_align, {"aligned", "abort", "failed", "timeout"}, enter_wall_align, tick_wall_align,
                 30.0});
    v.push_back({state::fine_align, {"aligned", "lost", "timeout"}, enter_fine_align, tick_fine_align,
                 s.mission.fine_align_timeout});
    v.push_back({state::pump_cycle, {"done"}, enter_pump, tick_pump, {}});
    v.push_back({state::recheck, {"extinguished", "still_burning", "empty", "refill"}, enter_recheck, tick_recheck, {}});
    v.push_back({state::refill, {"refilled"}, enter_refill, tick_refill, {}});
    return v;
}

inline void init_context(MissionContext& c, const Scenario& s) {
    c.scn = s;
    c.scene = std::make_unique<Scene>(c.scn);
    c.footprint = std::make_unique<FootprintChecker>(c.scn);
    c.arm = ArmModel::from_robot(s.robot);
    c.odo.true_pose = s.start_pose;
    c.odo.estimated_pose = s.start_pose;
    c.odo_rng = make_rng(s.seed, Stream::odometry);
    c.q = named_pose(NamedPose::folded);
    c.pump = make_pump(s.water);
    c.ledger = make_ledger(s.targets.size());
    c.v_exit = exit_velocity(s.water);
    c.wiggle.amplitude = s.mission.wiggle_amplitude;
    c.wiggle.period = s.mission.wiggle_period;
    c.wiggle.type = s.mission.wiggle_pattern;
    c.current_state = state::outdoor_nav;
}

/// Per-tick physics after the active state has chosen its command: speed
/// limits, odometry, collisions, arm motion, scan mapping and the trace.
inline void advance_world(MissionContext& c, const SimClock& clock) {
    const double cap = detail::speed_cap(c);
    VelocityCommand cmd = c.cmd;
    cmd.v = std::clamp(cmd.v, -cap, cap);
    cmd.omega = std::clamp(cmd.omega, -c.scn.robot.max_yaw_rate, c.scn.robot.max_yaw_rate);
    double& mx = c.stats.max_speed[c.current_state];
    mx = std::max(mx, std::abs(cmd.v));

    const OdometryState prev = c.odo;
    c.odo = step_odometry(c.odo, cmd, clock.dt, c.scn.drift, c.odo_rng);
    if ((cmd.v != 0.0 || cmd.omega != 0.0) && c.footprint->collides(c.odo.true_pose)) {
        c.odo = prev;
        c.stuck_time += clock.dt;
        ++c.stats.collisions;
    } else if (cmd.v != 0.0 || cmd.omega != 0.0) {
        c.stuck_time = 0.0;
    }
    detail::arm_busy(c);

    if (c.scan_grid && c.grid && clock.ticks % 10 == 0 &&
        (c.current_state == state::outdoor_nav || c.current_state == state::door_traverse ||
         c.current_state == state::indoor_search)) {
        integrate_scan(*c.grid, c.odo.estimated_pose, simulate_scan2d(c.scn, c.odo.true_pose, (1u << 24) + clock.ticks));
    }
    if (clock.ticks % 10 == 0) c.trajectory.push_back({clock.now(), c.odo.true_pose, c.odo.estimated_pose});
}

struct MissionResult {
    std::string terminal;
    EventLog log;
    double duration = 0.0;
    std::vector<FireTarget> targets;
    DeliveryLedger ledger;
    PumpState pump;
    MissionStats stats;
    std::vector<TrajectorySample> trajectory;
    std::optional<LayoutEstimate> layout;
};

/// Runs the whole mission in simulated time. With `pace` > 0 every tick is
/// held back until wall-clock time catches up with sim time / pace.
inline MissionResult run_firefight(const Scenario& s, std::optional<std::filesystem::path> dump_dir = std::nullopt,
                                   double pace = 0.0) {
    MissionContext ctx;
    init_context(ctx, s);
    ctx.dump_dir = std::move(dump_dir);
    SimClock clock{0.01, s.mission.global_timeout, 0};
    ctx.clock = &clock;
    MissionResult r;
    ctx.trajectory.push_back({0.0, ctx.odo.true_pose, ctx.odo.estimated_pose});
    try {
        const auto wall_start = std::chrono::steady_clock::now();
        std::function<void(MissionContext&, SimClock&)> pacer;
        if (pace > 0.0) {
            pacer = [=](MissionContext&, SimClock& k) {
                std::this_thread::sleep_until(wall_start + std::chrono::duration<double>(k.now() / pace));
            };
        }
        r.terminal = run_machine<MissionContext>(firefight_states(s), build_firefight_mission(), ctx, clock, r.log,
                                                 pacer, [](MissionContext& c, SimClock& k) { advance_world(c, k); });
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::global_timeout) throw;
        r.terminal = "global_timeout";
        ctx.stats.failure_reason = e.what();
    }
    r.duration = clock.now();
    r.targets = ctx.scn.targets;
    r.ledger = ctx.ledger;
    r.pump = ctx.pump;
    r.stats = ctx.stats;
    r.trajectory = std::move(ctx.trajectory);
    r.layout = ctx.layout_estimate;
    return r;
}

}  // namespace firebot
