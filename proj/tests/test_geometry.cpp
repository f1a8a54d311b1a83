#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "firebot/geometry.hpp"

using namespace firebot;

namespace {

Transform3D random_transform(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> a(-kPi, kPi), t(-2.0, 2.0);
    return {Vec3(t(rng), t(rng), t(rng)), rot_z(a(rng)) * rot_y(a(rng)) * rot_x(a(rng))};
}

}  // namespace

TEST(Intrinsics, ThermalFxMatchesClosedForm) {
    const auto k = intrinsics_from_fov(160, 120, deg2rad(57.0), deg2rad(43.6));
    EXPECT_NEAR(k.fx, 147.3, 0.05);
    EXPECT_NEAR(k.fx, 80.0 / std::tan(deg2rad(28.5)), 1e-9);
    EXPECT_DOUBLE_EQ(k.cx, 79.5);
    EXPECT_DOUBLE_EQ(k.cy, 59.5);
}

TEST(Intrinsics, NinetyDegreeUnitFocal) {
    const auto k = intrinsics_from_fov(2, 2, deg2rad(90.0), deg2rad(90.0));
    EXPECT_NEAR(k.fx, 1.0, 1e-12);
    EXPECT_NEAR(k.fy, 1.0, 1e-12);
}

TEST(Intrinsics, DepthCameraFx) {
    const auto k = intrinsics_from_fov(640, 480, deg2rad(87.0), deg2rad(58.0));
    EXPECT_NEAR(k.fx, 337.2, 0.05);
    EXPECT_NEAR(k.fx, 320.0 / std::tan(deg2rad(43.5)), 1e-9);
}

TEST(Intrinsics, RejectsBadFov) {
    EXPECT_THROW(intrinsics_from_fov(160, 120, 0.0, 0.5), Error);
    EXPECT_THROW(intrinsics_from_fov(160, 120, kPi, 0.5), Error);
    try {
        intrinsics_from_fov(160, 120, 1.0, -0.1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::fov_out_of_range);
    }
}

TEST(Intrinsics, MonotoneInFov) {
    double prev = 1e300;
    for (double deg = 10.0; deg < 170.0; deg += 5.0) {
        const double fx = intrinsics_from_fov(160, 120, deg2rad(deg), 0.5).fx;
        EXPECT_LT(fx, prev);
        prev = fx;
    }
}

TEST(Intrinsics, VfovFromHfovAndDfovIsRectilinear) {
    const double v = vfov_from_hfov_dfov(deg2rad(57.0), deg2rad(71.0));
    // diagonal of the image plane rectangle equals tan(d/2)
    EXPECT_NEAR(std::hypot(std::tan(deg2rad(28.5)), std::tan(v / 2.0)), std::tan(deg2rad(35.5)), 1e-12);
    EXPECT_THROW(vfov_from_hfov_dfov(deg2rad(60.0), deg2rad(50.0)), Error);
}

TEST(Backproject, PrincipalAxis) {
    const auto k = intrinsics_from_fov(160, 120, deg2rad(57.0), deg2rad(43.6));
    const UnitRay r = backproject_pixel(k, k.cx, k.cy);
    EXPECT_NEAR((r.direction - Vec3::UnitZ()).norm(), 0.0, 1e-12);
}

TEST(Backproject, FortyFiveDegrees) {
    const auto k = intrinsics_from_fov(640, 480, deg2rad(120.0), deg2rad(90.0));
    const UnitRay r = backproject_pixel(k, k.cx + k.fx, k.cy);
    EXPECT_NEAR((r.direction - Vec3(1, 0, 1).normalized()).norm(), 0.0, 1e-12);
}

TEST(Backproject, CornerPixelFormulaOracle) {
    const auto k = intrinsics_from_fov(160, 120, deg2rad(57.0), deg2rad(43.6));
    const UnitRay r = backproject_pixel(k, 0.0, 0.0);
    const Vec3 oracle = Vec3(-79.5 / k.fx, -59.5 / k.fy, 1.0).normalized();
    EXPECT_NEAR((r.direction - oracle).norm(), 0.0, 1e-12);
    EXPECT_NEAR(r.direction.x() / r.direction.z(), -79.5 / 147.3, 2e-4);
}

TEST(Backproject, OutOfBounds) {
    const auto k = intrinsics_from_fov(160, 120, 1.0, 0.8);
    try {
        backproject_pixel(k, 160.0, 3.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::pixel_out_of_bounds);
    }
}

TEST(Project, OnAxis) {
    const auto k = intrinsics_from_fov(160, 120, deg2rad(57.0), deg2rad(43.6));
    const auto [u, v] = project_point(k, Vec3(0, 0, 2));
    EXPECT_DOUBLE_EQ(u, k.cx);
    EXPECT_DOUBLE_EQ(v, k.cy);
}

TEST(Project, ElementAngularSize) {
    const auto k = intrinsics_from_fov(160, 120, deg2rad(57.0), deg2rad(43.6));
    const auto [u, v] = project_point(k, Vec3(0.035, 0.0, 1.5));
    EXPECT_NEAR(u - k.cx, 3.44, 0.005);
    EXPECT_NEAR(u - k.cx, 147.3 * 0.035 / 1.5, 0.002);
}

TEST(Project, BehindCamera) {
    const auto k = intrinsics_from_fov(160, 120, 1.0, 0.8);
    try {
        project_point(k, Vec3(0, 0, -1));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::behind_camera);
    }
}

TEST(Project, RoundTripRandomPixels) {
    const auto k = intrinsics_from_fov(640, 480, deg2rad(87.0), deg2rad(58.0));
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> uu(0.0, 639.999), vv(0.0, 479.999), dd(0.2, 9.0);
    for (int i = 0; i < 100; ++i) {
        const double u = uu(rng), v = vv(rng);
        const UnitRay r = backproject_pixel(k, u, v);
        const auto [u2, v2] = project_point(k, dd(rng) * r.direction);
        EXPECT_NEAR(u2, u, 1e-6);
        EXPECT_NEAR(v2, v, 1e-6);
    }
}

TEST(Project, BackprojectOfProjectionIsSameDirection) {
    const auto k = intrinsics_from_fov(160, 120, deg2rad(57.0), deg2rad(43.6));
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> xy(-0.5, 0.5), z(0.5, 5.0);
    int tested = 0;
    for (int i = 0; i < 500; ++i) {
        const Vec3 p(xy(rng), xy(rng), z(rng));
        const auto [u, v] = project_point(k, p);
        if (!k.contains(u, v)) continue;
        ++tested;
        EXPECT_NEAR((backproject_pixel(k, u, v).direction - p.normalized()).norm(), 0.0, 1e-9);
    }
    EXPECT_GT(tested, 100);
}

TEST(Transform, ComposeWithInverseIsIdentity) {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 50; ++i) {
        const Transform3D t = random_transform(rng);
        const Transform3D id = compose(t, invert(t));
        EXPECT_LT(id.translation.norm(), 1e-12);
        EXPECT_LT((id.rotation - Mat3::Identity()).norm(), 1e-12);
    }
}

TEST(Transform, IdentityAndExtrinsicOffset) {
    const Vec3 p(1.0, -2.0, 3.0);
    EXPECT_EQ(apply(Transform3D::identity(), p), p);
    const Vec3 q = apply(Transform3D::from_translation(Vec3(0.05, 0, 0)), Vec3::Zero());
    EXPECT_DOUBLE_EQ(q.x(), 0.05);
    EXPECT_DOUBLE_EQ(q.y(), 0.0);
    EXPECT_DOUBLE_EQ(q.z(), 0.0);
}

TEST(Transform, ApplyRayKeepsUnitLength) {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 50; ++i) {
        const UnitRay r = apply_ray(random_transform(rng), UnitRay::make(Vec3(1, 2, 3), Vec3(0.3, -0.2, 0.9)));
        EXPECT_NEAR(r.direction.norm(), 1.0, 1e-9);
    }
    EXPECT_THROW(UnitRay::make(Vec3::Zero(), Vec3::Zero()), Error);
}

TEST(Transform, LongChainsStayOrthonormal) {
    std::mt19937_64 rng(5);
    Transform3D acc;
    for (int i = 0; i < 1000; ++i) acc = acc * random_transform(rng);
    const Transform3D fixed = orthonormalized(acc);
    EXPECT_TRUE(fixed.is_valid(1e-9));
    EXPECT_LT((fixed.rotation - acc.rotation).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Pose2D, HeadingNormalized) {
    EXPECT_NEAR(Pose2D(0, 0, 3 * kPi).heading, kPi, 1e-12);
    EXPECT_NEAR(Pose2D(0, 0, -kPi).heading, kPi, 1e-12);
    EXPECT_NEAR(Pose2D(0, 0, 2 * kPi + 0.1).heading, 0.1, 1e-12);
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> a(-100.0, 100.0);
    for (int i = 0; i < 1000; ++i) {
        const double h = Pose2D(0, 0, a(rng)).heading;
        EXPECT_GT(h, -kPi);
        EXPECT_LE(h, kPi);
    }
}

TEST(Pose2D, WorldBodyRoundTrip) {
    const Pose2D p(1.0, 2.0, 0.7);
    const Vec2 q(0.3, -1.2);
    EXPECT_LT((p.to_body(p.to_world(q)) - q).norm(), 1e-12);
    const Vec2 fwd = p.to_world(Vec2(1, 0));
    EXPECT_NEAR(fwd.x(), 1.0 + std::cos(0.7), 1e-12);
    EXPECT_NEAR(fwd.y(), 2.0 + std::sin(0.7), 1e-12);
}

TEST(OpticalFrame, AxesFollowConvention) {
    const Mat3 r = optical_from_body_forward();
    EXPECT_EQ(r.col(2), Vec3::UnitX());   // camera z looks forward
    EXPECT_EQ(r.col(0), -Vec3::UnitY());  // camera x to the right
    EXPECT_EQ(r.col(1), -Vec3::UnitZ());  // camera y down
    EXPECT_NEAR(r.determinant(), 1.0, 1e-12);
}
