#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "firebot/sensors.hpp"

using namespace firebot;

namespace {

// optical frame at `eye` looking toward `at`, image up roughly world up
Transform3D camera_looking(const Vec3& eye, const Vec3& at) {
    const Vec3 fwd = (at - eye).normalized();
    Transform3D body;
    body.translation = eye;
    body.rotation.col(0) = fwd;
    body.rotation.col(1) = Vec3::UnitZ().cross(fwd).normalized();
    body.rotation.col(2) = fwd.cross(body.rotation.col(1));
    return body * Transform3D::from_rotation(optical_from_body_forward());
}

Scenario empty_room() {
    Scenario s = default_scenario();
    s.layout.pedestal.clear();
    return s;
}

int hot_pixels(const ThermalImage& img, double threshold) {
    return static_cast<int>(std::count_if(img.data.begin(), img.data.end(), [&](double x) { return x > threshold; }));
}

}  // namespace

TEST(Thermal, OnAxisBlobSizeAndTemperature) {
    const Scenario s = default_scenario();
    const FireTarget& tg = s.targets.front();
    const ThermalImage img = render_thermal(s, camera_looking(tg.position() + 1.5 * tg.normal(), tg.position()), 1);
    ASSERT_EQ(img.width, 160);
    ASSERT_EQ(img.height, 120);
    int u_min = img.width, u_max = -1;
    double peak = -1e9;
    for (int v = 0; v < img.height; ++v) {
        for (int u = 0; u < img.width; ++u) {
            if (img.at(u, v) > 50.0) {
                u_min = std::min(u_min, u);
                u_max = std::max(u_max, u);
            }
            peak = std::max(peak, img.at(u, v));
        }
    }
    // 35 mm at 1.5 m against 147.3 px focal length
    const double oracle = 0.035 / 1.5 * thermal_intrinsics(s.sensors).fx;
    EXPECT_NEAR(oracle, 3.44, 0.01);
    EXPECT_GE(u_max - u_min + 1, 3);
    EXPECT_LE(u_max - u_min + 1, 4);
    EXPECT_NEAR(peak, apparent_temperature(120.0, 0.55), 0.31);
}

TEST(Thermal, NoTargetInFrustum) {
    const Scenario s = default_scenario();
    const ThermalImage img = render_thermal(s, camera_looking(Vec3(5, 2, 1), Vec3(5, -5, 1)), 4);
    const double hi = *std::max_element(img.data.begin(), img.data.end());
    const double lo = *std::min_element(img.data.begin(), img.data.end());
    EXPECT_LT(hi, s.ambient_temp + 5 * s.sensors.thermal_noise);
    EXPECT_GE(lo, s.ambient_temp - 3 * s.sensors.thermal_noise - 1e-12);
}

TEST(Thermal, ExtinguishedTargetLooksLikeNoTarget) {
    Scenario s = default_scenario();
    const FireTarget tg = s.targets.front();
    const Transform3D cam = camera_looking(tg.position() + 1.5 * tg.normal(), tg.position());
    s.targets.front().extinguished = true;
    const ThermalImage out = render_thermal(s, cam, 9);
    Scenario cold = s;
    cold.targets.front().setpoint_temp = s.ambient_temp;
    cold.targets.front().emissivity = 1.0;
    const ThermalImage ref = render_thermal(cold, cam, 9);
    EXPECT_EQ(out.data, ref.data);
    EXPECT_EQ(hot_pixels(out, s.ambient_temp + 5 * s.sensors.thermal_noise), 0);
}

TEST(Thermal, Deterministic) {
    const Scenario s = default_scenario();
    const FireTarget& tg = s.targets.front();
    const Transform3D cam = camera_looking(tg.position() + 2.0 * tg.normal(), tg.position());
    EXPECT_EQ(render_thermal(s, cam, 5).data, render_thermal(s, cam, 5).data);
    EXPECT_NE(render_thermal(s, cam, 5).data, render_thermal(s, cam, 6).data);
}

TEST(Thermal, HotOnlyModeSelectsSamePixels) {
    const Scenario s = default_scenario();
    const Scene scene(s);
    const FireTarget& tg = s.targets.front();
    const Transform3D cam = camera_looking(tg.position() + 1.2 * tg.normal() + Vec3(0.1, 0, 0.05), tg.position());
    const ThermalImage a = render_thermal(s, scene, cam, 2, 0.0, false);
    const ThermalImage b = render_thermal(s, scene, cam, 2, 0.0, true);
    for (std::size_t i = 0; i < a.data.size(); ++i) EXPECT_EQ(a.data[i] > 50.0, b.data[i] > 50.0);
}

// every hot pixel's ray must pass through the aperture disc before reaching the element
TEST(Thermal, OpacityProperty) {
    const Scenario s = default_scenario();
    const Scene scene(s);
    const FireTarget& tg = s.targets.front();
    const ApertureDisc disc = aperture_disc(tg);
    const PinholeIntrinsics k = thermal_intrinsics(s.sensors);
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> d(0.8, 3.0), a(-1.2, 1.2), h(-0.5, 0.8);
    int seen = 0;
    for (int trial = 0; trial < 60; ++trial) {
        const double r = d(rng), ang = a(rng);
        const Vec3 along = tg.element_center.rotation.col(0);
        const Vec3 eye = tg.position() + r * (std::cos(ang) * tg.normal() + std::sin(ang) * along) + Vec3(0, 0, h(rng));
        const Transform3D cam = camera_looking(eye, tg.position());
        const ThermalImage img = render_thermal(s, scene, cam, static_cast<std::uint64_t>(trial));
        for (int v = 0; v < img.height; ++v) {
            for (int u = 0; u < img.width; ++u) {
                if (img.at(u, v) <= 50.0) continue;
                ++seen;
                const Vec3 dir = cam.rotation * Vec3((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0).normalized();
                const double t = (disc.center - cam.translation).dot(disc.normal) / dir.dot(disc.normal);
                ASSERT_GT(t, 0.0);
                const Vec3 p = cam.translation + t * dir;
                EXPECT_LE((p - disc.center).norm(), disc.radius + 1e-9);
            }
        }
    }
    EXPECT_GT(seen, 0);
}

TEST(Depth, FlatWallOnAxis) {
    const Scenario s = empty_room();
    const Transform3D cam = camera_looking(Vec3(8.0, 5.0, 1.5), Vec3(10.0, 5.0, 1.5));
    const DepthImage img = render_depth(s, cam, 0);
    const PinholeIntrinsics k = depth_intrinsics(s.sensors);
    const double r = img.at(static_cast<int>(std::round(k.cx)), static_cast<int>(std::round(k.cy)));
    EXPECT_NEAR(r, 2.0, 0.03);
}

TEST(Depth, PlexiglassAmbiguity) {
    const Scenario s = default_scenario();
    const FireTarget& tg = s.targets.front();
    const Vec3 along = tg.element_center.rotation.col(0);
    // on-axis pixel hits the plate 0.12 m beside the aperture, 1.5 m away
    const Vec3 spot = aperture_disc(tg).center + 0.12 * along;
    const Transform3D cam = camera_looking(spot + 1.5 * tg.normal(), spot);
    const PinholeIntrinsics k = depth_intrinsics(s.sensors);
    std::vector<double> seen;
    for (std::uint64_t f = 0; f < 40; ++f) {
        const DepthImage img = render_depth_window(s, cam, f, {300, 220, 340, 260});
        const double r = img.at(static_cast<int>(k.cx), static_cast<int>(k.cy));
        EXPECT_GE(r, 1.5 - 1e-3);
        EXPECT_LE(r, 1.65 + 1e-3);
        seen.push_back(r);
    }
    EXPECT_GT(*std::max_element(seen.begin(), seen.end()) - *std::min_element(seen.begin(), seen.end()), 0.05);
}

TEST(Depth, BeyondMaxRangeIsNoReturn) {
    const Scenario s = empty_room();
    const Transform3D cam = camera_looking(Vec3(2.0, -12.0, 1.5), Vec3(2.0, 0.0, 1.5));
    const DepthImage img = render_depth(s, cam, 0);
    const PinholeIntrinsics k = depth_intrinsics(s.sensors);
    EXPECT_EQ(img.at(static_cast<int>(k.cx), static_cast<int>(k.cy)), 0.0);
}

TEST(Depth, RangeDomainAndWindowConsistency) {
    const Scenario s = default_scenario();
    const FireTarget& tg = s.targets.front();
    const Transform3D cam = camera_looking(tg.position() + 1.3 * tg.normal() + Vec3(0.2, 0, 0.1), tg.position());
    const DepthImage full = render_depth(s, cam, 3);
    for (double x : full.data) EXPECT_TRUE(x == 0.0 || (x > 0.1 && x <= 10.0));
    const PixelWindow w{250, 180, 390, 300};
    const DepthImage part = render_depth_window(s, cam, 3, w);
    for (int v = 0; v < full.height; ++v) {
        for (int u = 0; u < full.width; ++u) {
            const bool in = u >= w.u0 && u < w.u1 && v >= w.v0 && v < w.v1;
            ASSERT_EQ(part.at(u, v), in ? full.at(u, v) : 0.0);
        }
    }
}

TEST(Depth, NeverBeyondFirstOpaqueSurface) {
    const Scenario s = default_scenario();
    const Scene scene(s);
    const FireTarget& tg = s.targets.front();
    const PinholeIntrinsics k = depth_intrinsics(s.sensors);
    const Transform3D cam = camera_looking(tg.position() + 1.4 * tg.normal() - Vec3(0.3, 0, 0.2), tg.position());
    const DepthImage img = render_depth(s, cam, 8);
    for (int v = 0; v < k.height; v += 7) {
        for (int u = 0; u < k.width; u += 7) {
            const Vec3 dir = cam.rotation * Vec3((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0).normalized();
            const RayHit hit = scene.cast({cam.translation, dir});
            const double r = img.at(u, v);
            if (r == 0.0) continue;
            if (hit.kind == SurfaceKind::front_plate) {
                EXPECT_LE(r, hit.t + tg.front_plate_offset + 1e-12);
            } else {
                EXPECT_LE(r, hit.t + 5 * s.sensors.depth_noise);
            }
        }
    }
}

TEST(Scan2D, CenteredInRoom) {
    const Scenario s = empty_room();
    const Scan2D scan = simulate_scan2d(s, Pose2D(5.0, 5.0, 0.0), 0);
    ASSERT_EQ(scan.ranges.size(), 1024u);
    ASSERT_EQ(scan.angles.size(), 1024u);
    // beam 512 points straight ahead at the east wall
    EXPECT_NEAR(scan.angles[512], 0.0, 1e-12);
    EXPECT_NEAR(scan.ranges[512], 5.0, 0.09);
    for (double r : scan.ranges) {
        EXPECT_FALSE(std::isnan(r));
        EXPECT_GE(r, 0.0);
        EXPECT_LE(r, 120.0);
    }
    for (std::size_t i = 1; i < scan.angles.size(); ++i) {
        EXPECT_NEAR(scan.angles[i] - scan.angles[i - 1], 2.0 * kPi / 1024, 1e-12);
    }
}

TEST(Scan2D, DoorGapGivesNoReturn) {
    const Scenario s = empty_room();
    const Scan2D scan = simulate_scan2d(s, Pose2D(5.0, 2.0, -kPi / 2.0), 0);
    EXPECT_EQ(scan.ranges[512], 0.0);
    // beams at +/- 45 deg hit the south wall beside the door
    EXPECT_NEAR(scan.ranges[512 + 128], 2.0 * std::sqrt(2.0), 0.09);
}

TEST(Scan3D, WallRingsCoplanar) {
    const Scenario s = empty_room();
    const auto cloud = simulate_scan3d(s, Pose2D(5.0, 5.0, 0.0), 0);
    std::vector<double> el;
    int wall = 0;
    for (const Vec3& p : cloud) {
        if (p.z() < 0.1 || std::abs(p.y()) > 4.0 || p.x() < 4.0) continue;
        ++wall;
        EXPECT_NEAR(p.x(), 5.0, 3 * s.sensors.scan_noise);
        el.push_back(std::atan2(p.z() - s.sensors.lidar_height, std::hypot(p.x(), p.y())));
    }
    EXPECT_GT(wall, 1000);
    std::sort(el.begin(), el.end());
    // ring elevations span the upper part of the 45 deg fan
    EXPECT_LE(el.back(), deg2rad(22.5) + 0.05);
}

TEST(Scan3D, Deterministic) {
    const Scenario s = default_scenario();
    const auto a = simulate_scan3d(s, Pose2D(2.0, 2.0, 0.3), 4);
    const auto b = simulate_scan3d(s, Pose2D(2.0, 2.0, 0.3), 4);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) ASSERT_EQ(a[i], b[i]);
}

TEST(Odometry, NoiselessStraightLine) {
    std::mt19937_64 rng(1);
    OdometryState st;
    st.true_pose = st.estimated_pose = Pose2D(0, 0, 0);
    st = step_odometry(st, {1.0, 0.0}, 1.0, DriftParams{0.0, 0.0, Vec2::Zero()}, rng);
    EXPECT_NEAR(st.true_pose.x, 1.0, 1e-12);
    EXPECT_NEAR(st.estimated_pose.x, 1.0, 1e-12);
    EXPECT_NEAR(st.true_pose.y, 0.0, 1e-12);
    EXPECT_NEAR(st.distance_travelled, 1.0, 1e-12);
}

TEST(Odometry, PureRotationKeepsPosition) {
    std::mt19937_64 rng(2);
    OdometryState st;
    st.true_pose = st.estimated_pose = Pose2D(3, 4, 0);
    for (int i = 0; i < 100; ++i) st = step_odometry(st, {0.0, 1.0}, 0.01, DriftParams{0.03, 0.02, Vec2::Zero()}, rng);
    EXPECT_NEAR(st.true_pose.heading, 1.0, 1e-9);
    EXPECT_DOUBLE_EQ(st.true_pose.x, 3.0);
    EXPECT_DOUBLE_EQ(st.estimated_pose.x, 3.0);
    EXPECT_DOUBLE_EQ(st.estimated_pose.y, 4.0);
    EXPECT_DOUBLE_EQ(st.distance_travelled, 0.0);
}

TEST(Odometry, UnicycleArcIsExact) {
    std::mt19937_64 rng(3);
    OdometryState st;
    st.true_pose = st.estimated_pose = Pose2D(0, 0, 0);
    for (int i = 0; i < 157; ++i) st = step_odometry(st, {1.0, 1.0}, 0.01, DriftParams{0, 0, Vec2::Zero()}, rng);
    // unit-radius circle about (0, 1)
    const double th = 1.57;
    EXPECT_NEAR(st.true_pose.x, std::sin(th), 1e-9);
    EXPECT_NEAR(st.true_pose.y, 1.0 - std::cos(th), 1e-9);
    EXPECT_NEAR(st.estimated_pose.x, st.true_pose.x, 1e-12);
}

TEST(Odometry, RandomWalkMagnitude) {
    // per-axis sigma 0.03 * sqrt(30) -> Rayleigh median sigma * sqrt(2 ln 2)
    const double oracle = 0.03 * std::sqrt(30.0) * std::sqrt(2.0 * std::log(2.0));
    std::vector<double> err;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        std::mt19937_64 rng(seed);
        OdometryState st;
        st.true_pose = st.estimated_pose = Pose2D(0, 0, 0);
        double last = 0.0;
        for (int i = 0; i < 3000; ++i) {
            st = step_odometry(st, {1.0, 0.0}, 0.01, DriftParams{0.03, 0.0, Vec2::Zero()}, rng);
            ASSERT_GE(st.distance_travelled, last);
            last = st.distance_travelled;
        }
        err.push_back(std::hypot(st.estimated_pose.x - st.true_pose.x, st.estimated_pose.y - st.true_pose.y));
    }
    std::nth_element(err.begin(), err.begin() + 50, err.end());
    const double med = err[50];
    EXPECT_GE(med, 0.10);
    EXPECT_LE(med, 0.30);
    EXPECT_NEAR(med, oracle, 0.3 * oracle);
}

TEST(Odometry, BiasAccumulatesWithPath) {
    std::mt19937_64 rng(4);
    OdometryState st;
    st.true_pose = st.estimated_pose = Pose2D(0, 0, kPi / 2);
    for (int i = 0; i < 1000; ++i) st = step_odometry(st, {1.0, 0.0}, 0.01, DriftParams{0, 0, Vec2(0.005, 0)}, rng);
    EXPECT_NEAR(st.estimated_pose.x - st.true_pose.x, 0.05, 1e-9);
}
