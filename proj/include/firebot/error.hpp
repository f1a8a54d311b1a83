#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace firebot {

enum class ErrorKind {
    fov_out_of_range,
    pixel_out_of_bounds,
    behind_camera,
    parse_error,
    validation_error,
    domain_error,
    no_depth,
    out_of_frustum,
    insufficient_points,
    goal_occupied,
    no_path,
    standoff_infeasible,
    joint_limit,
    collision_detected,
    no_wall_found,
    target_lost,
    undefined_transition,
    invalid_table,
    global_timeout,
    io_error,
    invalid_argument,
};

constexpr std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::fov_out_of_range: return "fov-out-of-range";
        case ErrorKind::pixel_out_of_bounds: return "pixel-out-of-bounds";
        case ErrorKind::behind_camera: return "behind-camera";
        case ErrorKind::parse_error: return "parse-error";
        case ErrorKind::validation_error: return "validation-error";
        case ErrorKind::domain_error: return "domain-error";
        case ErrorKind::no_depth: return "no-depth";
        case ErrorKind::out_of_frustum: return "out-of-frustum";
        case ErrorKind::insufficient_points: return "insufficient-points";
        case ErrorKind::goal_occupied: return "goal-occupied";
        case ErrorKind::no_path: return "no-path";
        case ErrorKind::standoff_infeasible: return "standoff-infeasible";
        case ErrorKind::joint_limit: return "joint-limit";
        case ErrorKind::collision_detected: return "collision-detected";
        case ErrorKind::no_wall_found: return "no-wall-found";
        case ErrorKind::target_lost: return "target-lost";
        case ErrorKind::undefined_transition: return "undefined-transition";
        case ErrorKind::invalid_table: return "invalid-table";
        case ErrorKind::global_timeout: return "global-timeout";
        case ErrorKind::io_error: return "io-error";
        case ErrorKind::invalid_argument: return "invalid-argument";
    }
    return "unknown";
}

/// Every failure raised by the library carries a machine-checkable kind.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace firebot
