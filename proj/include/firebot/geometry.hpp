#pragma once

// Frames, rigid transforms, rays and the pinhole camera model.
//
// Camera frames follow the usual optical convention: +z forward, +x right,
// +y down. Robot/world frames are x forward (east), y left (north), z up.

#include <cmath>
#include <numbers>
#include <optional>
#include <utility>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include "firebot/error.hpp"

namespace firebot {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = std::numbers::pi;

constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Wraps an angle into (-pi, pi].
inline double normalize_angle(double a) {
    a = std::remainder(a, 2.0 * kPi);  // [-pi, pi]
    if (a <= -kPi) a += 2.0 * kPi;
    return a;
}

inline bool is_finite(const Vec3& v) { return v.allFinite(); }

struct Pose2D {
    double x = 0.0;
    double y = 0.0;
    double heading = 0.0;

    Pose2D() = default;
    Pose2D(double x_, double y_, double heading_)
        : x(x_), y(y_), heading(normalize_angle(heading_)) {}

    Vec2 position() const { return {x, y}; }

    /// Point given in this pose's body frame, expressed in the parent frame.
    Vec2 to_world(const Vec2& body) const {
        const double c = std::cos(heading), s = std::sin(heading);
        return {x + c * body.x() - s * body.y(), y + s * body.x() + c * body.y()};
    }

    Vec2 to_body(const Vec2& world) const {
        const double c = std::cos(heading), s = std::sin(heading);
        const double dx = world.x() - x, dy = world.y() - y;
        return {c * dx + s * dy, -s * dx + c * dy};
    }

    friend bool operator==(const Pose2D&, const Pose2D&) = default;
};

inline double distance(const Pose2D& a, const Pose2D& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

inline Mat3 rot_x(double a) { return Eigen::AngleAxisd(a, Vec3::UnitX()).toRotationMatrix(); }
inline Mat3 rot_y(double a) { return Eigen::AngleAxisd(a, Vec3::UnitY()).toRotationMatrix(); }
inline Mat3 rot_z(double a) { return Eigen::AngleAxisd(a, Vec3::UnitZ()).toRotationMatrix(); }

/// Rigid transform p' = R p + t. Maps points from the child frame into the parent frame.
struct Transform3D {
    Vec3 translation = Vec3::Zero();
    Mat3 rotation = Mat3::Identity();

    static Transform3D identity() { return {}; }
    static Transform3D from_translation(const Vec3& t) { return {t, Mat3::Identity()}; }
    static Transform3D from_rotation(const Mat3& r) { return {Vec3::Zero(), r}; }

    /// Planar robot pose lifted to 3D (rotation about z, zero height).
    static Transform3D from_pose2d(const Pose2D& p, double z = 0.0) {
        return {Vec3(p.x, p.y, z), rot_z(p.heading)};
    }

    bool is_valid(double tol = 1e-9) const {
        if (!translation.allFinite() || !rotation.allFinite()) return false;
        const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
        return ortho <= tol && std::abs(rotation.determinant() - 1.0) <= tol;
    }
};

inline Transform3D compose(const Transform3D& a, const Transform3D& b) {
    return {a.rotation * b.translation + a.translation, a.rotation * b.rotation};
}

inline Transform3D invert(const Transform3D& a) {
    const Mat3 rt = a.rotation.transpose();
    return {-(rt * a.translation), rt};
}

inline Vec3 apply(const Transform3D& a, const Vec3& p) { return a.rotation * p + a.translation; }

/// Projects the rotation back onto SO(3); used after long composition chains.
inline Transform3D orthonormalized(const Transform3D& a) {
    Eigen::JacobiSVD<Mat3> svd(a.rotation, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 r = svd.matrixU() * svd.matrixV().transpose();
    if (r.determinant() < 0.0) {
        Mat3 u = svd.matrixU();
        u.col(2) *= -1.0;
        r = u * svd.matrixV().transpose();
    }
    return {a.translation, r};
}

inline Transform3D operator*(const Transform3D& a, const Transform3D& b) { return compose(a, b); }

struct UnitRay {
    Vec3 origin = Vec3::Zero();
    Vec3 direction = Vec3::UnitZ();

    static UnitRay make(const Vec3& origin, const Vec3& dir) {
        const double n = dir.norm();
        if (!(n > 0.0) || !std::isfinite(n)) {
            throw Error(ErrorKind::domain_error, "ray direction must be non-zero and finite");
        }
        return {origin, dir / n};
    }

    Vec3 at(double t) const { return origin + t * direction; }
};

inline UnitRay apply_ray(const Transform3D& a, const UnitRay& r) {
    return {apply(a, r.origin), (a.rotation * r.direction).normalized()};
}

struct PinholeIntrinsics {
    int width = 0;
    int height = 0;
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;

    bool is_valid() const {
        return width > 0 && height > 0 && fx > 0.0 && fy > 0.0 && cx >= 0.0 && cx < width &&
               cy >= 0.0 && cy < height;
    }

    bool contains(double u, double v) const {
        return u >= 0.0 && u < width && v >= 0.0 && v < height;
    }
};

inline PinholeIntrinsics intrinsics_from_fov(int width, int height, double hfov, double vfov) {
    if (!(hfov > 0.0 && hfov < kPi) || !(vfov > 0.0 && vfov < kPi)) {
        throw Error(ErrorKind::fov_out_of_range, "field of view must lie in (0, pi)");
    }
    if (width < 2 || height < 2) {
        throw Error(ErrorKind::invalid_argument, "image must be at least 2x2 pixels");
    }
    PinholeIntrinsics k;
    k.width = width;
    k.height = height;
    k.fx = (width / 2.0) / std::tan(hfov / 2.0);
    k.fy = (height / 2.0) / std::tan(vfov / 2.0);
    k.cx = (width - 1) / 2.0;
    k.cy = (height - 1) / 2.0;
    return k;
}

/// Vertical FOV of a rectilinear sensor given its horizontal and diagonal FOV.
/// The aspect ratio follows from the two angles; the pixel aspect is not needed.
inline double vfov_from_hfov_dfov(double hfov, double dfov) {
    const double th = std::tan(hfov / 2.0);
    const double td = std::tan(dfov / 2.0);
    if (!(td > th)) throw Error(ErrorKind::fov_out_of_range, "diagonal FOV must exceed horizontal FOV");
    return 2.0 * std::atan(std::sqrt(td * td - th * th));
}

inline UnitRay backproject_pixel(const PinholeIntrinsics& k, double u, double v) {
    if (!k.contains(u, v)) throw Error(ErrorKind::pixel_out_of_bounds, "pixel outside the image");
    const Vec3 d((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
    return {Vec3::Zero(), d.normalized()};
}

inline std::pair<double, double> project_point(const PinholeIntrinsics& k, const Vec3& p) {
    if (!(p.z() > 0.0)) throw Error(ErrorKind::behind_camera, "point is behind the camera");
    return {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy};
}

/// Camera optical frame expressed in a body frame whose x axis is the viewing
/// direction and z axis is up.
inline Mat3 optical_from_body_forward() {
    Mat3 r;
    // columns: camera x (right) = -y_body, camera y (down) = -z_body, camera z = x_body
    r << 0.0, 0.0, 1.0,
        -1.0, 0.0, 0.0,
         0.0, -1.0, 0.0;
    return r;
}

}  // namespace firebot
