#pragma once

// Six-joint arm: forward kinematics, named poses, joint-space trajectories,
// pitch adjustment and the two-joint spray wiggle.

#include <array>
#include <cmath>
#include <vector>

#include "firebot/error.hpp"
#include "firebot/geometry.hpp"
#include "firebot/world.hpp"

namespace firebot {

using JointState = std::array<double, 6>;

inline constexpr int kYawJoint = 0;
inline constexpr int kPitchJoint = 2;

struct ArmModel {
    std::array<double, 4> links{0.28, 0.28, 0.21, 0.13};
    JointState lower{-kPi, -kPi, -kPi, -kPi, -kPi, -kPi};
    JointState upper{kPi, kPi, kPi, kPi, kPi, kPi};
    double max_joint_speed = 0.20 / 0.90;  // rad/s: 0.2 m/s at full reach
    Transform3D mount = Transform3D::from_translation(Vec3(0.0, 0.0, 0.45));
    Transform3D nozzle = Transform3D::from_translation(Vec3(0.03, 0.0, -0.04));
    Transform3D thermal_to_depth = Transform3D::from_translation(Vec3(0.0, -0.05, 0.0));
    // robot base box the arm must stay out of
    Vec3 box_min{-0.28, -0.35, 0.0};
    Vec3 box_max{0.28, 0.35, 0.40};

    double reach() const { return links[0] + links[1] + links[2] + links[3]; }

    static ArmModel from_robot(const RobotParams& r) {
        ArmModel m;
        if (r.link_lengths.size() != 4) throw Error(ErrorKind::validation_error, "arm needs four link lengths");
        for (std::size_t i = 0; i < 4; ++i) m.links[i] = r.link_lengths[i];
        m.max_joint_speed = r.max_linear_arm_speed / r.reach;
        m.mount = r.arm_mount;
        m.nozzle = r.nozzle_offset;
        m.thermal_to_depth = r.thermal_to_depth;
        m.box_min = Vec3(-r.footprint_length / 2.0, -r.footprint_width / 2.0, 0.0);
        m.box_max = Vec3(r.footprint_length / 2.0, r.footprint_width / 2.0, r.body_height);
        return m;
    }
};

inline bool within_limits(const ArmModel& m, const JointState& q) {
    for (std::size_t i = 0; i < 6; ++i) {
        if (!(q[i] >= m.lower[i] - 1e-12 && q[i] <= m.upper[i] + 1e-12)) return false;
    }
    return true;
}

inline void check_limits(const ArmModel& m, const JointState& q) {
    if (!within_limits(m, q)) throw Error(ErrorKind::joint_limit, "joint state outside limits");
}

/// Frames after each link, in the robot base frame: [mount, after link 1, ..., end effector].
/// Chain: Rz(q1) Ry(-q2) L1 Ry(-q3) L2 Rx(q4) Ry(-q5) L3 Rx(q6) L4, so that
/// positive q2, q3, q5 raise the tool and the zero pose points straight ahead.
inline std::array<Transform3D, 5> link_frames(const ArmModel& m, const JointState& q) {
    auto tx = [](double l) { return Transform3D::from_translation(Vec3(l, 0.0, 0.0)); };
    auto r = [](const Mat3& rot) { return Transform3D::from_rotation(rot); };
    std::array<Transform3D, 5> f;
    f[0] = m.mount * r(rot_z(q[0]));
    f[1] = f[0] * r(rot_y(-q[1])) * tx(m.links[0]);
    f[2] = f[1] * r(rot_y(-q[2])) * tx(m.links[1]);
    f[3] = f[2] * r(rot_x(q[3]) * rot_y(-q[4])) * tx(m.links[2]);
    f[4] = f[3] * r(rot_x(q[5])) * tx(m.links[3]);
    return f;
}

/// End-effector pose in the robot base frame; its x axis is the tool direction.
inline Transform3D forward_kinematics(const ArmModel& m, const JointState& q) {
    check_limits(m, q);
    return link_frames(m, q)[4];
}

inline Transform3D nozzle_pose(const ArmModel& m, const JointState& q) { return forward_kinematics(m, q) * m.nozzle; }

/// Thermal camera optical frame (z forward, x right, y down) in the robot base frame.
inline Transform3D thermal_camera_pose(const ArmModel& m, const JointState& q) {
    return forward_kinematics(m, q) * Transform3D::from_rotation(optical_from_body_forward());
}

inline Transform3D depth_camera_pose(const ArmModel& m, const JointState& q) {
    return thermal_camera_pose(m, q) * m.thermal_to_depth;
}

/// Elevation of the jet direction above the horizontal, rad.
inline double nozzle_pitch(const ArmModel& m, const JointState& q) {
    const Vec3 d = nozzle_pose(m, q).rotation.col(0);
    return std::asin(std::clamp(d.z(), -1.0, 1.0));
}

/// Analytic position Jacobian of the end effector (3 x 6).
inline Eigen::Matrix<double, 3, 6> position_jacobian(const ArmModel& m, const JointState& q) {
    check_limits(m, q);
    auto tx = [](double l) { return Transform3D::from_translation(Vec3(l, 0.0, 0.0)); };
    auto r = [](const Mat3& rot) { return Transform3D::from_rotation(rot); };
    // joint frames before each joint rotation, with the local axis it turns about
    std::array<Transform3D, 6> pre;
    std::array<Vec3, 6> axis{Vec3::UnitZ(), -Vec3::UnitY(), -Vec3::UnitY(), Vec3::UnitX(), -Vec3::UnitY(),
                             Vec3::UnitX()};
    pre[0] = m.mount;
    pre[1] = pre[0] * r(rot_z(q[0]));
    pre[2] = pre[1] * r(rot_y(-q[1])) * tx(m.links[0]);
    pre[3] = pre[2] * r(rot_y(-q[2])) * tx(m.links[1]);
    pre[4] = pre[3] * r(rot_x(q[3]));
    pre[5] = pre[4] * r(rot_y(-q[4])) * tx(m.links[2]);
    const Vec3 p = (pre[5] * r(rot_x(q[5])) * tx(m.links[3])).translation;
    Eigen::Matrix<double, 3, 6> j;
    for (int i = 0; i < 6; ++i) {
        const Vec3 a = pre[static_cast<std::size_t>(i)].rotation * axis[static_cast<std::size_t>(i)];
        j.col(i) = a.cross(p - pre[static_cast<std::size_t>(i)].translation);
    }
    return j;
}

/// True when any sample along the links lies inside the base box.
inline bool arm_collides(const ArmModel& m, const JointState& q, double sample = 0.02) {
    const auto f = link_frames(m, q);
    auto inside = [&](const Vec3& p) {
        return (p.array() >= m.box_min.array()).all() && (p.array() <= m.box_max.array()).all();
    };
    for (std::size_t i = 0; i + 1 < f.size(); ++i) {
        const Vec3 a = f[i].translation, b = f[i + 1].translation;
        const int n = std::max(1, static_cast<int>(std::ceil((b - a).norm() / sample)));
        for (int k = 0; k <= n; ++k) {
            if (inside(a + (b - a) * (static_cast<double>(k) / n))) return true;
        }
    }
    return false;
}

enum class NamedPose { folded, raised, abate };

inline const char* to_string(NamedPose p) {
    switch (p) {
        case NamedPose::folded: return "folded";
        case NamedPose::raised: return "raised";
        case NamedPose::abate: return "abate";
    }
    return "?";
}

/// `side` is +1 when the camera should look to the robot's left, -1 for right.
inline JointState named_pose(NamedPose p, int side = 1) {
    const double yaw = side >= 0 ? kPi / 2.0 : -kPi / 2.0;
    switch (p) {
        case NamedPose::folded: return {0.0, 1.3, -2.6, 0.0, 1.3, 0.0};
        case NamedPose::raised: return {yaw, 1.5, -0.5, 0.0, -1.0, 0.0};
        case NamedPose::abate: return {yaw, 1.0, -1.0, 0.0, 0.0, 0.0};
    }
    return {};
}

struct JointTrajectory {
    std::vector<double> times;
    std::vector<JointState> states;
    double duration = 0.0;

    JointState at(double t) const {
        if (states.empty()) throw Error(ErrorKind::invalid_argument, "empty trajectory");
        if (t <= 0.0 || duration <= 0.0) return t <= 0.0 ? states.front() : states.back();
        if (t >= duration) return states.back();
        const JointState& a = states.front();
        const JointState& b = states.back();
        JointState q;
        for (std::size_t i = 0; i < 6; ++i) q[i] = a[i] + (b[i] - a[i]) * (t / duration);
        return q;
    }
};

/// Straight line in joint space at the speed of the slowest joint, sampled
/// every `dt` and checked against the base box.
inline JointTrajectory plan_joint_trajectory(const ArmModel& m, const JointState& from, const JointState& to,
                                             double max_joint_speed, double dt = 0.01) {
    check_limits(m, from);
    check_limits(m, to);
    if (!(max_joint_speed > 0.0)) throw Error(ErrorKind::invalid_argument, "joint speed must be positive");
    double dq = 0.0;
    for (std::size_t i = 0; i < 6; ++i) dq = std::max(dq, std::abs(to[i] - from[i]));
    JointTrajectory tr;
    tr.duration = dq / max_joint_speed;
    const int n = tr.duration > 0.0 ? std::max(1, static_cast<int>(std::ceil(tr.duration / dt))) : 0;
    for (int k = 0; k <= n; ++k) {
        const double s = n == 0 ? 1.0 : static_cast<double>(k) / n;
        JointState q;
        for (std::size_t i = 0; i < 6; ++i) q[i] = from[i] + (to[i] - from[i]) * s;
        if (arm_collides(m, q)) throw Error(ErrorKind::collision_detected, "trajectory passes through the base");
        tr.times.push_back(s * tr.duration);
        tr.states.push_back(q);
    }
    return tr;
}

/// Changes only the pitch joint; positive delta raises the nozzle.
inline JointState pitch_adjust(const ArmModel& m, JointState q, double delta) {
    q[kPitchJoint] += delta;
    check_limits(m, q);
    return q;
}

struct WigglePattern {
    int joint_a = kYawJoint;
    int joint_b = kPitchJoint;
    double amplitude = std::atan(0.09 / 1.5);
    double period = 4.0;
    WigglePatternType type = WigglePatternType::raster;
    int raster_ratio = 3;  // odd: fast-axis sweeps per slow-axis period
};

namespace detail {

inline double square_wave(double x) { return x - std::floor(x) < 0.5 ? 1.0 : -1.0; }
inline double triangle_wave(double x) { return 1.0 - 4.0 * std::abs(x - std::floor(x + 0.5)); }

}  // namespace detail

/// Joint offsets at time t. The quadrature pattern jumps between the four
/// corners of the square; the raster sweeps it continuously, so the stream
/// also crosses the middle. Both start at the (A, A) corner.
inline std::pair<double, double> wiggle_offsets(const WigglePattern& w, double t) {
    if (!(t >= 0.0)) throw Error(ErrorKind::invalid_argument, "wiggle time must be non-negative");
    const double x = t / w.period;
    if (w.type == WigglePatternType::quadrature) {
        return {w.amplitude * detail::square_wave(x), w.amplitude * detail::square_wave(x + 0.25)};
    }
    return {w.amplitude * detail::triangle_wave(x), w.amplitude * detail::triangle_wave(w.raster_ratio * x)};
}

inline JointState apply_wiggle(const WigglePattern& w, JointState q, double t) {
    const auto [da, db] = wiggle_offsets(w, t);
    q[static_cast<std::size_t>(w.joint_a)] += da;
    q[static_cast<std::size_t>(w.joint_b)] += db;
    return q;
}

}  // namespace firebot
