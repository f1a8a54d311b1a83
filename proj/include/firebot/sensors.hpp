#pragma once

// Simulated thermal camera, depth camera, planar and 3D LiDAR, and drifting
// wheel/LiDAR odometry. All renders are pure functions of
// (scenario, pose, frame index, seed).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <random>
#include <vector>

#include "firebot/geometry.hpp"
#include "firebot/raycast.hpp"
#include "firebot/rng.hpp"
#include "firebot/world.hpp"

namespace firebot {

template <typename T>
struct Image {
    int width = 0;
    int height = 0;
    std::vector<T> data;
    double timestamp = 0.0;

    Image() = default;
    Image(int w, int h, T fill) : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

    T& at(int u, int v) { return data[static_cast<std::size_t>(v) * width + u]; }
    const T& at(int u, int v) const { return data[static_cast<std::size_t>(v) * width + u]; }
};

using ThermalImage = Image<double>;  // apparent temperature, Celsius
using DepthImage = Image<double>;    // range along the pixel ray, metres; 0 = no return

struct Scan2D {
    std::vector<double> angles;  // robot frame, 0 = forward, counter-clockwise positive
    std::vector<double> ranges;  // 0 = no return
    double timestamp = 0.0;
};

namespace detail {

/// Counter-based standard normal: same (key, index) gives the same draw, which
/// lets windowed renders reproduce full-frame noise pixel for pixel.
inline double hashed_normal(std::uint64_t key, std::uint64_t index) {
    const std::uint64_t a = splitmix64(key ^ (2 * index));
    const std::uint64_t b = splitmix64(key ^ (2 * index + 1));
    const double u1 = (static_cast<double>(a >> 11) + 0.5) * 0x1.0p-53;
    const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

inline std::uint64_t frame_key(std::uint64_t seed, Stream stream, std::uint64_t frame) {
    return splitmix64(splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(stream)) ^ frame);
}

}  // namespace detail

inline PinholeIntrinsics thermal_intrinsics(const SensorParams& s) {
    return intrinsics_from_fov(s.thermal_width, s.thermal_height, s.thermal_hfov, s.thermal_vfov());
}

inline PinholeIntrinsics depth_intrinsics(const SensorParams& s) {
    return intrinsics_from_fov(s.depth_width, s.depth_height, s.depth_hfov, s.depth_vfov);
}

/// Thermal frame seen from `camera_pose` (optical frame in world). The
/// plexiglass cover is opaque in the LWIR band, so a heating element only
/// shows through its aperture. Noise is Gaussian, truncated at 3 sigma.
/// With `hot_only`, pixels that see no element are left at exactly ambient
/// and get no noise; hot pixels are unchanged. Any threshold above
/// ambient + 3 sigma therefore selects the same pixels in both modes.
inline ThermalImage render_thermal(const Scenario& s, const Scene& scene, const Transform3D& camera_pose,
                                   std::uint64_t frame = 0, double timestamp = 0.0, bool hot_only = false) {
    const PinholeIntrinsics k = thermal_intrinsics(s.sensors);
    ThermalImage img(k.width, k.height, s.ambient_temp);
    img.timestamp = timestamp;
    const std::uint64_t key = detail::frame_key(s.seed, Stream::thermal, frame);
    const double sigma = s.sensors.thermal_noise;
    auto noise = [&](int u, int v) {
        const std::uint64_t idx = static_cast<std::uint64_t>(v) * k.width + u;
        return sigma * std::clamp(detail::hashed_normal(key, idx), -3.0, 3.0);
    };

    // pixels that may see an element: projected element rectangles, padded by a pixel
    std::vector<std::uint8_t> candidate(img.data.size(), 0);
    const Transform3D world_to_cam = invert(camera_pose);
    std::vector<double> hot(s.targets.size());
    for (std::size_t i = 0; i < s.targets.size(); ++i) {
        const FireTarget& tg = s.targets[i];
        if (tg.extinguished) continue;
        hot[i] = apparent_temperature(tg.setpoint_temp, tg.emissivity);
        double u0 = 1e300, v0 = 1e300, u1 = -1e300, v1 = -1e300;
        bool in_front = true;
        for (int cx : {-1, 1}) {
            for (int cy : {-1, 1}) {
                const Vec3 local(cx * tg.element_width / 2.0, cy * tg.element_height / 2.0, kElementStandoff);
                const Vec3 c = apply(world_to_cam, apply(tg.element_center, local));
                if (!(c.z() > 1e-6)) {
                    in_front = false;
                    continue;
                }
                const auto [u, v] = project_point(k, c);
                u0 = std::min(u0, u);
                u1 = std::max(u1, u);
                v0 = std::min(v0, v);
                v1 = std::max(v1, v);
            }
        }
        int iu0 = 0, iv0 = 0, iu1 = k.width - 1, iv1 = k.height - 1;
        if (in_front) {
            if (u1 < -1.0 || v1 < -1.0 || u0 > k.width || v0 > k.height) continue;
            iu0 = std::max(0, static_cast<int>(std::floor(u0)) - 1);
            iv0 = std::max(0, static_cast<int>(std::floor(v0)) - 1);
            iu1 = std::min(k.width - 1, static_cast<int>(std::ceil(u1)) + 1);
            iv1 = std::min(k.height - 1, static_cast<int>(std::ceil(v1)) + 1);
        }
        for (int v = iv0; v <= iv1; ++v) {
            for (int u = iu0; u <= iu1; ++u) candidate[static_cast<std::size_t>(v) * k.width + u] = 1;
        }
    }

    for (int v = 0; v < k.height; ++v) {
        for (int u = 0; u < k.width; ++u) {
            double value = s.ambient_temp;
            bool is_hot = false;
            if (candidate[static_cast<std::size_t>(v) * k.width + u]) {
                const Vec3 dir =
                    camera_pose.rotation * Vec3((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0).normalized();
                const UnitRay ray{camera_pose.translation, dir};
                for (std::size_t i = 0; i < s.targets.size(); ++i) {
                    if (s.targets[i].extinguished) continue;
                    if (!Scene::hit_element(s.targets[i], ray)) continue;
                    const RayHit first = scene.cast(ray);
                    if (first.kind == SurfaceKind::element && first.target == static_cast<int>(i)) {
                        value = hot[i];
                        is_hot = true;
                    }
                    break;
                }
            }
            if (hot_only && !is_hot) continue;
            img.at(u, v) = value + noise(u, v);
        }
    }
    return img;
}

inline ThermalImage render_thermal(const Scenario& s, const Transform3D& camera_pose, std::uint64_t frame = 0,
                                   double timestamp = 0.0) {
    return render_thermal(s, Scene(s), camera_pose, frame, timestamp);
}

struct PixelWindow {
    int u0 = 0, v0 = 0, u1 = 0, v1 = 0;  // half-open [u0, u1) x [v0, v1)
};

/// Depth frame restricted to `window`; pixels outside it read 0. Inside the
/// window the values equal those of the full-frame render.
inline DepthImage render_depth_window(const Scenario& s, const Transform3D& camera_pose, std::uint64_t frame,
                                      PixelWindow window, double timestamp = 0.0) {
    const SensorParams& sp = s.sensors;
    const PinholeIntrinsics k = depth_intrinsics(sp);
    const Scene scene(s);
    DepthImage img(k.width, k.height, 0.0);
    img.timestamp = timestamp;
    const std::uint64_t key = detail::frame_key(s.seed, Stream::depth, frame);
    std::mt19937_64 plate_rng = make_rng(s.seed, Stream::depth_plate, frame);
    const double plate_u = std::uniform_real_distribution<double>(0.0, 1.0)(plate_rng);

    window.u0 = std::max(window.u0, 0);
    window.v0 = std::max(window.v0, 0);
    window.u1 = std::min(window.u1, k.width);
    window.v1 = std::min(window.v1, k.height);
    for (int v = window.v0; v < window.v1; ++v) {
        for (int u = window.u0; u < window.u1; ++u) {
            const Vec3 dir = camera_pose.rotation * Vec3((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0).normalized();
            const RayHit hit = scene.cast({camera_pose.translation, dir});
            if (!hit) continue;
            double range;
            if (hit.kind == SurfaceKind::front_plate) {
                // transparent plexiglass: the sensor settles anywhere between the plates
                const FireTarget& tg = s.targets[static_cast<std::size_t>(hit.target)];
                range = hit.t + plate_u * tg.front_plate_offset;
            } else {
                const std::uint64_t idx = static_cast<std::uint64_t>(v) * k.width + u;
                range = hit.t + sp.depth_noise * detail::hashed_normal(key, idx);
            }
            img.at(u, v) = (range > sp.depth_min && range <= sp.depth_max) ? range : 0.0;
        }
    }
    return img;
}

inline DepthImage render_depth(const Scenario& s, const Transform3D& camera_pose, std::uint64_t frame = 0,
                               double timestamp = 0.0) {
    return render_depth_window(s, camera_pose, frame, {0, 0, s.sensors.depth_width, s.sensors.depth_height},
                               timestamp);
}

/// Planar LiDAR scan from the robot's true pose. Range noise is truncated at
/// 3 sigma, like the thermal noise.
inline Scan2D simulate_scan2d(const Scenario& s, const Pose2D& pose, std::uint64_t frame = 0) {
    const SensorParams& sp = s.sensors;
    const Scene scene(s);
    std::mt19937_64 rng = make_rng(s.seed, Stream::scan2d, frame);
    std::normal_distribution<double> noise(0.0, sp.scan_noise);
    Scan2D scan;
    scan.angles.resize(static_cast<std::size_t>(sp.scan_beams));
    scan.ranges.resize(static_cast<std::size_t>(sp.scan_beams));
    const Vec3 origin(pose.x, pose.y, sp.lidar_height);
    for (int i = 0; i < sp.scan_beams; ++i) {
        const double a = -kPi + 2.0 * kPi * i / sp.scan_beams;
        const double wa = pose.heading + a;
        RayHit hit;
        hit.t = sp.scan_max;
        scene.cast_static({origin, Vec3(std::cos(wa), std::sin(wa), 0.0)}, 1e-9, hit);
        const double n = std::clamp(noise(rng), -3.0 * sp.scan_noise, 3.0 * sp.scan_noise);
        double r = 0.0;
        if (hit) r = std::clamp(hit.t + n, 0.0, sp.scan_max);
        scan.angles[static_cast<std::size_t>(i)] = a;
        scan.ranges[static_cast<std::size_t>(i)] = r;
    }
    return scan;
}

/// 3D LiDAR sweep; points in the robot frame with z measured from the floor.
/// Floor returns are included.
inline std::vector<Vec3> simulate_scan3d(const Scenario& s, const Pose2D& pose, std::uint64_t frame = 0,
                                         bool with_noise = true) {
    const SensorParams& sp = s.sensors;
    const Scene scene(s);
    std::mt19937_64 rng = make_rng(s.seed, Stream::scan3d, frame);
    std::normal_distribution<double> noise(0.0, sp.scan_noise);
    std::vector<Vec3> cloud;
    cloud.reserve(static_cast<std::size_t>(sp.scan_beams) * sp.scan_rings);
    const Vec3 origin(pose.x, pose.y, sp.lidar_height);
    for (int ring = 0; ring < sp.scan_rings; ++ring) {
        const double el = -sp.scan_vfov / 2.0 + sp.scan_vfov * ring / (sp.scan_rings - 1);
        for (int i = 0; i < sp.scan_beams; ++i) {
            const double a = -kPi + 2.0 * kPi * i / sp.scan_beams;
            const Vec3 body(std::cos(el) * std::cos(a), std::cos(el) * std::sin(a), std::sin(el));
            const Vec3 world = rot_z(pose.heading) * body;
            const RayHit hit = scene.cast({origin, world}, 1e-9, sp.scan_max);
            const double n = std::clamp(noise(rng), -3.0 * sp.scan_noise, 3.0 * sp.scan_noise);
            if (!hit) continue;
            const double r = with_noise ? hit.t + n : hit.t;
            cloud.push_back(Vec3(0.0, 0.0, sp.lidar_height) + r * body);
        }
    }
    return cloud;
}

struct VelocityCommand {
    double v = 0.0;      // m/s
    double omega = 0.0;  // rad/s
};

struct OdometryState {
    Pose2D true_pose;
    Pose2D estimated_pose;
    double distance_travelled = 0.0;
};

namespace detail {

inline Pose2D integrate_unicycle(const Pose2D& p, double v, double omega, double dt) {
    const double dth = omega * dt;
    double dx, dy;
    if (std::abs(dth) < 1e-9) {
        dx = v * dt * std::cos(p.heading + dth / 2.0);
        dy = v * dt * std::sin(p.heading + dth / 2.0);
    } else {
        const double r = v / omega;
        dx = r * (std::sin(p.heading + dth) - std::sin(p.heading));
        dy = -r * (std::cos(p.heading + dth) - std::cos(p.heading));
    }
    return Pose2D(p.x + dx, p.y + dy, p.heading + dth);
}

}  // namespace detail

/// Advances the true pose with exact unicycle kinematics and the estimate with
/// the same command corrupted by drift: per-axis translational noise scaled by
/// sqrt(path increment), heading noise scaled by sqrt(turn increment), and a
/// world-frame bias proportional to path length.
inline OdometryState step_odometry(const OdometryState& state, const VelocityCommand& cmd, double dt,
                                   const DriftParams& drift, std::mt19937_64& rng) {
    std::normal_distribution<double> unit(0.0, 1.0);
    const double n1 = unit(rng), n2 = unit(rng), n3 = unit(rng);

    OdometryState next = state;
    next.true_pose = detail::integrate_unicycle(state.true_pose, cmd.v, cmd.omega, dt);

    const double ds = std::abs(cmd.v) * dt;
    const double dth = std::abs(cmd.omega) * dt;
    Pose2D est = detail::integrate_unicycle(state.estimated_pose, cmd.v, cmd.omega, dt);
    const double st = drift.sigma_t * std::sqrt(ds);
    est = Pose2D(est.x + st * n1 + drift.bias.x() * ds, est.y + st * n2 + drift.bias.y() * ds,
                 est.heading + drift.sigma_r * std::sqrt(dth) * n3);
    next.estimated_pose = est;
    next.distance_travelled = state.distance_travelled + ds;
    return next;
}

/// Writes a binary 16-bit portable graymap; `scale` maps values to counts.
template <typename T>
void write_pgm(std::ostream& out, const Image<T>& img, double offset, double scale) {
    out << "P5\n" << img.width << " " << img.height << "\n65535\n";
    for (const T& x : img.data) {
        const double c = std::clamp((static_cast<double>(x) - offset) * scale, 0.0, 65535.0);
        const auto w = static_cast<std::uint16_t>(std::lround(c));
        out.put(static_cast<char>(w >> 8));
        out.put(static_cast<char>(w & 0xFF));
    }
}

inline void write_scan_csv(std::ostream& out, const Scan2D& scan) {
    out << "angle,range\n";
    for (std::size_t i = 0; i < scan.angles.size(); ++i) out << scan.angles[i] << "," << scan.ranges[i] << "\n";
}

}  // namespace firebot
