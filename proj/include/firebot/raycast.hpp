#pragma once

// First-hit ray casting against the building, pedestal, floor and fire targets.

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "firebot/geometry.hpp"
#include "firebot/world.hpp"

namespace firebot {

enum class SurfaceKind { none, wall, pedestal, floor, element, front_plate };

struct RayHit {
    double t = std::numeric_limits<double>::infinity();
    SurfaceKind kind = SurfaceKind::none;
    int target = -1;

    explicit operator bool() const { return kind != SurfaceKind::none; }
};

/// Heating elements sit this far proud of their wall so the two never tie.
inline constexpr double kElementStandoff = 0.002;

/// Static geometry of a scenario, prepared once per render.
class Scene {
public:
    explicit Scene(const Scenario& s) : targets_(&s.targets) {
        for (const WallSegment& w : solid_wall_pieces(s.layout)) add_vertical(w.p0, w.p1, 0.0, w.height, SurfaceKind::wall);
        const auto& ped = s.layout.pedestal;
        for (std::size_t i = 0; i < ped.size(); ++i) {
            add_vertical(ped[i], ped[(i + 1) % ped.size()], 0.0, s.layout.pedestal_height, SurfaceKind::pedestal);
        }
        pedestal_ = ped;
        pedestal_height_ = s.layout.pedestal_height;
    }

    const std::vector<FireTarget>& targets() const { return *targets_; }

    /// Nearest surface along the ray with t in (t_min, t_max).
    RayHit cast(const UnitRay& ray, double t_min = 1e-9,
                double t_max = std::numeric_limits<double>::infinity()) const {
        RayHit best;
        best.t = t_max;
        cast_static(ray, t_min, best);
        for (std::size_t i = 0; i < targets_->size(); ++i) {
            const FireTarget& tg = (*targets_)[i];
            if (auto t = hit_front_plate(tg, ray); t && *t > t_min && *t < best.t) {
                best = {*t, SurfaceKind::front_plate, static_cast<int>(i)};
            }
            if (auto t = hit_element(tg, ray); t && *t > t_min && *t < best.t) {
                best = {*t, SurfaceKind::element, static_cast<int>(i)};
            }
        }
        if (best.kind == SurfaceKind::none) best.t = std::numeric_limits<double>::infinity();
        return best;
    }

    /// Walls, pedestal and floor only.
    void cast_static(const UnitRay& ray, double t_min, RayHit& best) const {
        const Vec3& o = ray.origin;
        const Vec3& d = ray.direction;
        for (const Panel& p : panels_) {
            const double denom = p.normal.x() * d.x() + p.normal.y() * d.y();
            if (std::abs(denom) < 1e-12) continue;
            const double t = (p.normal.x() * (p.a.x() - o.x()) + p.normal.y() * (p.a.y() - o.y())) / denom;
            if (!(t > t_min && t < best.t)) continue;
            const double hx = o.x() + t * d.x() - p.a.x();
            const double hy = o.y() + t * d.y() - p.a.y();
            const double s = hx * p.dir.x() + hy * p.dir.y();
            if (s < 0.0 || s > p.length) continue;
            const double z = o.z() + t * d.z();
            if (z < p.z0 || z > p.z1) continue;
            best = {t, p.kind, -1};
        }
        if (d.z() < -1e-12) {
            const double t = -o.z() / d.z();
            if (t > t_min && t < best.t) best = {t, SurfaceKind::floor, -1};
        }
        if (!pedestal_.empty() && std::abs(d.z()) > 1e-12) {
            const double t = (pedestal_height_ - o.z()) / d.z();
            if (t > t_min && t < best.t) {
                const Vec2 p(o.x() + t * d.x(), o.y() + t * d.y());
                if (point_in_polygon(pedestal_, p)) best = {t, SurfaceKind::pedestal, -1};
            }
        }
    }

    /// Distance along the ray to the heating element's face, if the ray meets it.
    static std::optional<double> hit_element(const FireTarget& tg, const UnitRay& ray) {
        const Vec3 n = tg.normal();
        const Vec3 c = tg.position() + kElementStandoff * n;
        const double denom = n.dot(ray.direction);
        if (std::abs(denom) < 1e-12) return std::nullopt;
        const double t = n.dot(c - ray.origin) / denom;
        if (!(t > 0.0)) return std::nullopt;
        const Vec3 local = tg.element_center.rotation.transpose() * (ray.at(t) - c);
        if (std::abs(local.x()) > tg.element_width / 2.0 || std::abs(local.y()) > tg.element_height / 2.0) {
            return std::nullopt;
        }
        // the cover is a closed housing: from outside, the element is only
        // reachable through the aperture
        const Vec3 front = tg.position() + tg.front_plate_offset * n;
        if (n.dot(ray.origin - front) > 0.0) {
            const double tp = n.dot(front - ray.origin) / denom;
            const Vec3 q = ray.at(tp) - front;
            const double r = tg.aperture_diameter / 2.0;
            if (q.squaredNorm() > r * r) return std::nullopt;
        }
        return t;
    }

    /// Distance to the solid part of the plexiglass cover (outside the hole).
    static std::optional<double> hit_front_plate(const FireTarget& tg, const UnitRay& ray) {
        const Vec3 n = tg.normal();
        const Vec3 c = tg.position() + tg.front_plate_offset * n;
        const double denom = n.dot(ray.direction);
        if (std::abs(denom) < 1e-12) return std::nullopt;
        const double t = n.dot(c - ray.origin) / denom;
        if (!(t > 0.0)) return std::nullopt;
        const Vec3 local = tg.element_center.rotation.transpose() * (ray.at(t) - c);
        const double half = tg.front_plate_size / 2.0;
        if (std::abs(local.x()) > half || std::abs(local.y()) > half) return std::nullopt;
        const double r = tg.aperture_diameter / 2.0;
        if (local.x() * local.x() + local.y() * local.y() < r * r) return std::nullopt;
        return t;
    }

private:
    struct Panel {
        Vec2 a;
        Vec2 dir;
        Vec2 normal;
        double length;
        double z0, z1;
        SurfaceKind kind;
    };

    void add_vertical(const Vec2& a, const Vec2& b, double z0, double z1, SurfaceKind kind) {
        const Vec2 d = b - a;
        const double len = d.norm();
        if (len <= 0.0) return;
        const Vec2 dir = d / len;
        panels_.push_back({a, dir, Vec2(-dir.y(), dir.x()), len, z0, z1, kind});
    }

    const std::vector<FireTarget>* targets_;
    std::vector<Panel> panels_;
    std::vector<Vec2> pedestal_;
    double pedestal_height_ = 0.0;
};

/// Shortest distance from point p to segment ab.
inline double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 ab = b - a;
    const double len2 = ab.squaredNorm();
    double s = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
    s = std::clamp(s, 0.0, 1.0);
    return (a + s * ab - p).norm();
}

inline bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
    auto cross = [](const Vec2& u, const Vec2& v) { return u.x() * v.y() - u.y() * v.x(); };
    const double d1 = cross(b - a, c - a), d2 = cross(b - a, d - a);
    const double d3 = cross(d - c, a - c), d4 = cross(d - c, b - c);
    return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0));
}

/// Obstacle outlines prepared once for repeated footprint checks.
class FootprintChecker {
public:
    explicit FootprintChecker(const Scenario& s)
        : half_length_(s.robot.footprint_length / 2.0), half_width_(s.robot.footprint_width / 2.0) {
        for (const WallSegment& w : solid_wall_pieces(s.layout)) edges_.emplace_back(w.p0, w.p1);
        const auto& ped = s.layout.pedestal;
        for (std::size_t i = 0; i < ped.size(); ++i) edges_.emplace_back(ped[i], ped[(i + 1) % ped.size()]);
    }

    /// True when the robot's rectangular footprint at `pose` overlaps a wall or the pedestal.
    bool collides(const Pose2D& pose) const {
        const double hl = half_length_, hw = half_width_;
        const Vec2 corners[4] = {pose.to_world({hl, hw}), pose.to_world({-hl, hw}), pose.to_world({-hl, -hw}),
                                 pose.to_world({hl, -hw})};
        for (const auto& [a, b] : edges_) {
            for (int i = 0; i < 4; ++i) {
                if (segments_intersect(a, b, corners[i], corners[(i + 1) % 4])) return true;
            }
            const Vec2 la = pose.to_body(a);
            if (std::abs(la.x()) <= hl && std::abs(la.y()) <= hw) return true;
        }
        return false;
    }

private:
    double half_length_, half_width_;
    std::vector<std::pair<Vec2, Vec2>> edges_;
};

inline bool footprint_collides(const Scenario& s, const Pose2D& pose) { return FootprintChecker(s).collides(pose); }

}  // namespace firebot
