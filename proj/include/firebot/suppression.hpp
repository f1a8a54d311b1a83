#pragma once

// Water delivery: hydraulics, ballistic stream, pump bookkeeping, wall
// alignment from the planar scan and the two fine-aiming loops.

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "firebot/error.hpp"
#include "firebot/geometry.hpp"
#include "firebot/raycast.hpp"
#include "firebot/sensors.hpp"
#include "firebot/world.hpp"

namespace firebot {

// ---------------------------------------------------------------- hydraulics

/// Bernoulli exit speed, m/s.
inline double exit_velocity(const WaterSystemParams& w) {
    if (!(w.pump_pressure >= 0.0)) throw Error(ErrorKind::domain_error, "pump pressure must be non-negative");
    return std::sqrt(2.0 * w.pump_pressure / w.water_density);
}

/// Volumetric flow, L/s.
inline double flow_rate(const WaterSystemParams& w) {
    const double r = w.nozzle_diameter / 2.0;
    return exit_velocity(w) * kPi * r * r * 1000.0;
}

/// Vertical drop of a horizontal jet after `range` metres.
inline double drop_compensation(double range, double v_exit) {
    const double t = range / v_exit;
    return 0.5 * kGravity * t * t;
}

// ---------------------------------------------------------------- ballistics

struct StreamResult {
    Vec3 impact = Vec3::Zero();
    SurfaceKind surface = SurfaceKind::none;  // none: still airborne at the time cap
    double flight_time = 0.0;
    int crossed_target = -1;  // target whose aperture disc the jet passed through
    bool crossing() const { return crossed_target >= 0; }
};

/// Drag-free jet from the nozzle origin along its x axis, integrated in
/// `dt` steps until the first surface or `t_max`.
inline StreamResult stream_impact(const Scene& scene, const Transform3D& nozzle_world, double v_exit,
                                  double dt = 1e-3, double t_max = 3.0) {
    if (!(v_exit > 0.0)) throw Error(ErrorKind::invalid_argument, "exit velocity must be positive");
    const Vec3 p0 = nozzle_world.translation;
    const Vec3 v0 = v_exit * nozzle_world.rotation.col(0).normalized();
    auto at = [&](double t) { return Vec3(p0 + v0 * t - Vec3(0.0, 0.0, 0.5 * kGravity * t * t)); };
    StreamResult res;
    const auto& targets = scene.targets();
    Vec3 prev = p0;
    const int steps = static_cast<int>(std::ceil(t_max / dt - 1e-9));
    for (int k = 1; k <= steps; ++k) {
        const double t = std::min(k * dt, t_max);
        const Vec3 cur = at(t);
        const Vec3 seg = cur - prev;
        const double len = seg.norm();
        if (len > 0.0) {
            const UnitRay ray{prev, seg / len};
            const RayHit hit = scene.cast(ray, 0.0, len);
            const double limit = hit ? hit.t : len;
            for (std::size_t i = 0; i < targets.size() && res.crossed_target < 0; ++i) {
                const ApertureDisc disc = aperture_disc(targets[i]);
                const double den = disc.normal.dot(ray.direction);
                if (std::abs(den) < 1e-12) continue;
                const double s = disc.normal.dot(disc.center - prev) / den;
                if (s < 0.0 || s > limit) continue;
                if ((ray.at(s) - disc.center).norm() <= disc.radius) res.crossed_target = static_cast<int>(i);
            }
            if (hit) {
                res.impact = ray.at(hit.t);
                res.surface = hit.kind;
                res.flight_time = t - dt + dt * hit.t / len;
                return res;
            }
        }
        prev = cur;
    }
    res.impact = prev;
    res.flight_time = t_max;
    return res;
}

inline StreamResult stream_impact(const Scenario& s, const Transform3D& nozzle_world, double v_exit) {
    return stream_impact(Scene(s), nozzle_world, v_exit);
}

// ---------------------------------------------------------------- pump

struct PumpState {
    bool on = false;
    double elapsed_on = 0.0;
    double flow_rate = 0.0;  // L/s while running
    double tank_remaining = 15.0;
};

struct ExtinguishEvent {
    int target = -1;
    double time = 0.0;
};

struct DeliveryLedger {
    double liters_ejected = 0.0;
    std::vector<double> liters_through;  // per target
    std::vector<ExtinguishEvent> extinguish_events;
};

inline PumpState make_pump(const WaterSystemParams& w) {
    PumpState p;
    p.flow_rate = flow_rate(w);
    p.tank_remaining = w.tank_volume;
    return p;
}

inline DeliveryLedger make_ledger(std::size_t n_targets) {
    DeliveryLedger l;
    l.liters_through.assign(n_targets, 0.0);
    return l;
}

/// Advances the pump by dt. Water counts as delivered to `crossed_target`
/// when the jet passes through its aperture; a target goes out once its
/// delivered volume reaches the amount it needs.
inline void pump_step(PumpState& pump, DeliveryLedger& ledger, std::vector<FireTarget>& targets, double dt,
                      int crossed_target, double now) {
    if (!(dt > 0.0)) throw Error(ErrorKind::invalid_argument, "dt must be positive");
    if (!pump.on) return;
    pump.elapsed_on += dt;
    if (pump.tank_remaining <= 0.0) return;
    const double vol = std::min(pump.flow_rate * dt, pump.tank_remaining);
    pump.tank_remaining -= vol;
    if (pump.tank_remaining < 1e-12) pump.tank_remaining = 0.0;
    ledger.liters_ejected += vol;
    if (crossed_target < 0 || crossed_target >= static_cast<int>(targets.size())) return;
    const auto i = static_cast<std::size_t>(crossed_target);
    if (ledger.liters_through.size() < targets.size()) ledger.liters_through.resize(targets.size(), 0.0);
    ledger.liters_through[i] += vol;
    if (!targets[i].extinguished && ledger.liters_through[i] >= targets[i].liters_required - 1e-12) {
        targets[i].extinguished = true;
        ledger.extinguish_events.push_back({crossed_target, now});
    }
}

// ---------------------------------------------------------------- wall alignment

struct WallFit {
    double distance = 0.0;  // perpendicular, robot center to wall line
    double bearing = 0.0;   // direction of the wall's foot point in the robot frame
    int points = 0;
};

/// Least-squares line through the returns whose bearing lies within
/// `half_width` of `center`.
inline std::optional<WallFit> fit_wall(const Scan2D& scan, double center, double half_width, int min_points = 10) {
    std::vector<Vec2> pts;
    for (std::size_t i = 0; i < scan.ranges.size(); ++i) {
        const double r = scan.ranges[i];
        if (!(r > 0.0)) continue;
        if (std::abs(normalize_angle(scan.angles[i] - center)) > half_width) continue;
        pts.emplace_back(r * std::cos(scan.angles[i]), r * std::sin(scan.angles[i]));
    }
    if (static_cast<int>(pts.size()) < min_points) return std::nullopt;
    Vec2 mean = Vec2::Zero();
    for (const auto& p : pts) mean += p;
    mean /= static_cast<double>(pts.size());
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    for (const auto& p : pts) cov += (p - mean) * (p - mean).transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
    Vec2 n = es.eigenvectors().col(0);
    double d = n.dot(mean);
    if (d < 0.0) {
        n = -n;
        d = -d;
    }
    return WallFit{d, std::atan2(n.y(), n.x()), static_cast<int>(pts.size())};
}

struct WallAlignCommand {
    double v = 0.0;
    double omega = 0.0;
    bool aligned = false;
};

/// Brings the robot to `standoff` from the wall using the planar scan: turn
/// to face the wall, drive to the standoff, then turn so the wall sits at
/// `side` (0 = straight ahead, +1 = left, -1 = right).
class WallAligner {
public:
    enum class Phase { face, approach, turn, done };

    explicit WallAligner(double standoff = 1.5, int side = 0, double max_yaw_rate = 1.0, double max_speed = 0.2)
        : standoff_(standoff), side_(side), max_yaw_(max_yaw_rate), max_v_(max_speed),
          expected_(side * kPi / 2.0) {}

    Phase phase() const { return phase_; }
    const std::optional<WallFit>& last_fit() const { return fit_; }

    WallAlignCommand step(const Scan2D& scan) {
        fit_ = fit_wall(scan, expected_, deg2rad(60.0));
        if (!fit_) throw Error(ErrorKind::no_wall_found, "no wall in the scan sector");
        expected_ = fit_->bearing;
        const double ang_tol = deg2rad(1.0);
        const double goal_bearing = side_ * kPi / 2.0;
        if (phase_ == Phase::face && std::abs(normalize_angle(fit_->bearing - goal_bearing)) < ang_tol &&
            std::abs(fit_->distance - standoff_) <= 0.03) {
            phase_ = Phase::done;
        }
        switch (phase_) {
            case Phase::face:
                if (std::abs(fit_->bearing) < ang_tol) {
                    phase_ = Phase::approach;
                    return step_approach();
                }
                return {0.0, yaw(1.5 * fit_->bearing), false};
            case Phase::approach: return step_approach();
            case Phase::turn: {
                const double e = normalize_angle(fit_->bearing - goal_bearing);
                if (std::abs(e) < ang_tol) {
                    phase_ = Phase::done;
                    return {0.0, 0.0, true};
                }
                return {0.0, yaw(1.5 * e), false};
            }
            case Phase::done: return {0.0, 0.0, true};
        }
        return {};
    }

private:
    WallAlignCommand step_approach() {
        const double e = fit_->distance - standoff_;
        if (std::abs(e) < 0.01) {
            phase_ = side_ == 0 && std::abs(fit_->bearing) < deg2rad(1.0) ? Phase::done : Phase::turn;
            if (phase_ == Phase::done) return {0.0, 0.0, true};
            return {0.0, yaw(1.5 * normalize_angle(fit_->bearing - side_ * kPi / 2.0)), false};
        }
        const double v = std::clamp(0.8 * e, -max_v_, max_v_);
        return {std::abs(v) < 0.02 ? std::copysign(0.02, v) : v, yaw(1.5 * fit_->bearing), false};
    }

    double yaw(double w) const {
        const double m = std::clamp(w, -max_yaw_, max_yaw_);
        // floor of 0.02 rad/s
        if (std::abs(m) < 0.02) return std::copysign(0.02, m);
        return m;
    }

    double standoff_;
    int side_;
    double max_yaw_, max_v_;
    double expected_;
    Phase phase_ = Phase::face;
    std::optional<WallFit> fit_;
};

// ---------------------------------------------------------------- fine aiming

struct AlignmentStatus {
    bool wall_aligned = false;
    double lateral_error = 0.0;    // m, aim point minus target along the robot's forward axis
    double elevation_error = 0.0;  // rad, nozzle elevation minus required elevation
    bool converged = false;
};

/// Aim errors in the robot base frame for a wall parallel to the robot's
/// forward axis. `target` is the heat source position in the same frame.
inline AlignmentStatus aim_errors(const Transform3D& nozzle_base, const Vec3& target, double v_exit) {
    const Vec3 n = nozzle_base.translation;
    const Vec3 d = nozzle_base.rotation.col(0).normalized();
    AlignmentStatus st;
    st.wall_aligned = true;
    if (std::abs(d.y()) > 1e-9) {
        const double s = (target.y() - n.y()) / d.y();
        st.lateral_error = n.x() + s * d.x() - target.x();
    } else {
        st.lateral_error = n.x() - target.x();
    }
    const double horiz = std::hypot(target.x() - n.x(), target.y() - n.y());
    const double range = (target - n).norm();
    const double aim_z = target.z() + drop_compensation(range, v_exit);
    const double wanted = std::atan2(aim_z - n.z(), horiz);
    st.elevation_error = std::asin(std::clamp(d.z(), -1.0, 1.0)) - wanted;
    return st;
}

/// Fore/aft proportional loop on the lateral error.
class HorizontalAligner {
public:
    HorizontalAligner(double gain = 1.0, double tolerance = 0.02, int needed = 3, double max_speed = 0.1)
        : k_(gain), tol_(tolerance), needed_(needed), vmax_(max_speed) {}

    double step(double lateral_error) {
        count_ = std::abs(lateral_error) <= tol_ ? count_ + 1 : 0;
        return std::clamp(-k_ * lateral_error, -vmax_, vmax_);
    }
    bool converged() const { return count_ >= needed_; }
    void reset() { count_ = 0; }

private:
    double k_, tol_;
    int needed_, count_ = 0;
    double vmax_;
};

inline double horizontal_align_step(double lateral_error, double gain = 1.0, double max_speed = 0.1) {
    return std::clamp(-gain * lateral_error, -max_speed, max_speed);
}

/// Pitch-joint correction for one estimate, clamped to +-2 degrees.
inline double vertical_align_step(double elevation_error, double gain = 0.8, double max_step = deg2rad(2.0)) {
    return std::clamp(-gain * elevation_error, -max_step, max_step);
}

/// Raises target_lost once no estimate has arrived for longer than `patience`.
class TargetWatchdog {
public:
    explicit TargetWatchdog(double patience = 2.0) : patience_(patience) {}
    void seen(double now) { last_ = now; }
    void check(double now) const {
        if (now - last_ > patience_) throw Error(ErrorKind::target_lost, "no target estimate within the patience window");
    }
    void reset(double now) { last_ = now; }

private:
    double patience_;
    double last_ = 0.0;
};

}  // namespace firebot
