#pragma once

// Layout extraction from 3D scans, occupancy grids, A* planning, waypoint
// generation and pure-pursuit tracking.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <queue>
#include <random>
#include <vector>

#include <nlohmann/json.hpp>

#include "firebot/error.hpp"
#include "firebot/geometry.hpp"
#include "firebot/raycast.hpp"
#include "firebot/sensors.hpp"
#include "firebot/world.hpp"

namespace firebot {

// ---------------------------------------------------------------- layout

struct Segment2D {
    Vec2 a = Vec2::Zero();
    Vec2 b = Vec2::Zero();
    int line = -1;  // segments cut from the same fitted line share this id
    int inliers = 0;

    double length() const { return (b - a).norm(); }
};

struct LayoutGap {
    int line = -1;
    Vec2 center = Vec2::Zero();
    double width = 0.0;
};

struct WallLine {
    Vec2 a = Vec2::Zero();  // extent along the fitted line
    Vec2 b = Vec2::Zero();
    int line = -1;

    double length() const { return (b - a).norm(); }
    Vec2 direction() const { return (b - a).normalized(); }
};

struct LayoutEstimate {
    std::vector<WallLine> wall_lines;
    std::vector<Segment2D> segments;
    std::vector<LayoutGap> gaps;
};

struct PlaneExtractionParams {
    double min_height = 0.3;
    double max_height = 2.5;
    double inlier_distance = 0.05;
    int min_inliers = 50;
    double split_gap = 0.3;
    int min_segment_points = 5;
    double min_segment_length = 0.3;
    double merge_distance = 0.15;  // parallel lines closer than this share an id
    int iterations = 300;
    std::uint64_t seed = 0x5eed;
};

namespace detail {

struct Line2 {
    Vec2 point;
    Vec2 dir;

    double distance(const Vec2& p) const {
        const Vec2 d = p - point;
        return std::abs(d.x() * dir.y() - d.y() * dir.x());
    }
    double along(const Vec2& p) const { return (p - point).dot(dir); }
};

inline Line2 fit_line(const std::vector<Vec2>& pts, const std::vector<int>& idx) {
    Vec2 mean = Vec2::Zero();
    for (int i : idx) mean += pts[static_cast<std::size_t>(i)];
    mean /= static_cast<double>(idx.size());
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    for (int i : idx) {
        const Vec2 d = pts[static_cast<std::size_t>(i)] - mean;
        cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
    Vec2 dir = es.eigenvectors().col(1);
    // canonical orientation so results do not depend on solver sign choices
    if (dir.x() < -1e-12 || (std::abs(dir.x()) <= 1e-12 && dir.y() < 0.0)) dir = -dir;
    return {mean, dir};
}

inline std::optional<Vec2> intersect(const Line2& l1, const Line2& l2) {
    const double den = l1.dir.x() * l2.dir.y() - l1.dir.y() * l2.dir.x();
    if (std::abs(den) < 1e-9) return std::nullopt;
    const Vec2 d = l2.point - l1.point;
    const double t = (d.x() * l2.dir.y() - d.y() * l2.dir.x()) / den;
    return l1.point + t * l1.dir;
}

}  // namespace detail

/// Greedy sequential RANSAC on the horizontal projection of the points that
/// fall inside the height band. Segments come out grouped by line.
inline std::vector<Segment2D> extract_vertical_planes(const std::vector<Vec3>& cloud,
                                                      const PlaneExtractionParams& p = {}) {
    std::vector<Vec2> pts;
    for (const Vec3& q : cloud) {
        if (q.z() >= p.min_height && q.z() <= p.max_height) pts.emplace_back(q.x(), q.y());
    }
    if (static_cast<int>(pts.size()) < p.min_inliers) {
        throw Error(ErrorKind::insufficient_points, "not enough points in the wall height band");
    }
    std::mt19937_64 rng(p.seed);
    std::vector<int> remaining(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) remaining[i] = static_cast<int>(i);

    std::vector<Segment2D> out;
    std::vector<detail::Line2> found;
    while (static_cast<int>(remaining.size()) >= p.min_inliers) {
        std::uniform_int_distribution<std::size_t> pick(0, remaining.size() - 1);
        std::size_t best_count = 0;
        detail::Line2 best{};
        for (int it = 0; it < p.iterations; ++it) {
            const Vec2& a = pts[static_cast<std::size_t>(remaining[pick(rng)])];
            const Vec2& b = pts[static_cast<std::size_t>(remaining[pick(rng)])];
            if ((b - a).norm() < 0.1) continue;
            const detail::Line2 cand{a, (b - a).normalized()};
            std::size_t count = 0;
            for (int i : remaining) count += cand.distance(pts[static_cast<std::size_t>(i)]) <= p.inlier_distance;
            if (count > best_count) {
                best_count = count;
                best = cand;
            }
        }
        if (static_cast<int>(best_count) < p.min_inliers) break;

        std::vector<int> inl, rest;
        detail::Line2 line = best;
        for (int refine = 0; refine < 3; ++refine) {
            inl.clear();
            for (int i : remaining) {
                if (line.distance(pts[static_cast<std::size_t>(i)]) <= p.inlier_distance) inl.push_back(i);
            }
            line = detail::fit_line(pts, inl);
        }
        inl.clear();
        for (int i : remaining) {
            (line.distance(pts[static_cast<std::size_t>(i)]) <= p.inlier_distance ? inl : rest).push_back(i);
        }
        if (static_cast<int>(inl.size()) < p.min_inliers) break;
        remaining = std::move(rest);
        int line_id = static_cast<int>(found.size());
        for (std::size_t k = 0; k < found.size(); ++k) {
            if (std::abs(found[k].dir.dot(line.dir)) > std::cos(deg2rad(5.0)) &&
                found[k].distance(line.point) < p.merge_distance) {
                line_id = static_cast<int>(k);
                break;
            }
        }
        if (line_id == static_cast<int>(found.size())) found.push_back(line);

        std::vector<double> s;
        s.reserve(inl.size());
        for (int i : inl) s.push_back(line.along(pts[static_cast<std::size_t>(i)]));
        std::sort(s.begin(), s.end());
        std::size_t start = 0;
        for (std::size_t i = 1; i <= s.size(); ++i) {
            if (i == s.size() || s[i] - s[i - 1] > p.split_gap) {
                if (static_cast<int>(i - start) >= p.min_segment_points && s[i - 1] - s[start] >= p.min_segment_length) {
                    out.push_back({line.point + s[start] * line.dir, line.point + s[i - 1] * line.dir, line_id,
                                   static_cast<int>(i - start)});
                }
                start = i;
            }
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const Segment2D& a, const Segment2D& b) { return a.line < b.line; });
    return out;
}

/// Inlier-free intervals between consecutive segments of one line that are
/// at least `min_width` wide.
inline std::vector<LayoutGap> find_door_gaps(const std::vector<Segment2D>& segments, double min_width) {
    if (!(min_width > 0.0)) throw Error(ErrorKind::invalid_argument, "min_width must be positive");
    std::vector<LayoutGap> gaps;
    int max_line = -1;
    for (const auto& s : segments) max_line = std::max(max_line, s.line);
    for (int l = 0; l <= max_line; ++l) {
        std::vector<const Segment2D*> pieces;
        for (const auto& s : segments) {
            if (s.line == l) pieces.push_back(&s);
        }
        if (pieces.size() < 2) continue;
        const Vec2 origin = pieces.front()->a;
        const Vec2 dir = (pieces.front()->b - pieces.front()->a).normalized();
        std::vector<std::pair<double, double>> iv;
        for (const auto* s : pieces) {
            double u = (s->a - origin).dot(dir), v = (s->b - origin).dot(dir);
            if (u > v) std::swap(u, v);
            iv.emplace_back(u, v);
        }
        std::sort(iv.begin(), iv.end());
        double reach = iv.front().second;
        for (std::size_t i = 1; i < iv.size(); ++i) {
            const double w = iv[i].first - reach;
            if (w >= min_width) {
                const double mid = 0.5 * (iv[i].first + reach);
                gaps.push_back({l, origin + mid * dir, w});
            }
            reach = std::max(reach, iv[i].second);
        }
    }
    return gaps;
}

/// One wall line per fitted line; ends lying near the crossing with another
/// line are snapped onto it.
inline LayoutEstimate assemble_layout(const std::vector<Segment2D>& segments, double min_door_width = 0.8,
                                      double snap_distance = 0.3) {
    LayoutEstimate est;
    est.segments = segments;
    int max_line = -1;
    for (const auto& s : segments) max_line = std::max(max_line, s.line);
    std::vector<detail::Line2> lines;
    for (int l = 0; l <= max_line; ++l) {
        std::vector<const Segment2D*> pieces;
        for (const auto& s : segments) {
            if (s.line == l) pieces.push_back(&s);
        }
        if (pieces.empty()) continue;
        const detail::Line2 base{pieces.front()->a, (pieces.front()->b - pieces.front()->a).normalized()};
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto* s : pieces) {
            for (const Vec2& q : {s->a, s->b}) {
                lo = std::min(lo, base.along(q));
                hi = std::max(hi, base.along(q));
            }
        }
        est.wall_lines.push_back({base.point + lo * base.dir, base.point + hi * base.dir, l});
        lines.push_back(base);
    }
    for (std::size_t i = 0; i < est.wall_lines.size(); ++i) {
        WallLine& w = est.wall_lines[i];
        Vec2* ends[2] = {&w.a, &w.b};
        for (Vec2* e : ends) {
            double best = snap_distance;
            Vec2 snapped = *e;
            for (std::size_t j = 0; j < lines.size(); ++j) {
                if (j == i) continue;
                const double c = std::abs(lines[i].dir.dot(lines[j].dir));
                if (c > std::cos(deg2rad(30.0))) continue;
                const auto x = detail::intersect(lines[i], lines[j]);
                if (x && (*x - *e).norm() < best) {
                    best = (*x - *e).norm();
                    snapped = *x;
                }
            }
            *e = snapped;
        }
    }
    est.gaps = find_door_gaps(segments, min_door_width);
    return est;
}

inline LayoutEstimate extract_layout(const std::vector<Vec3>& cloud, double min_door_width = 0.8,
                                     const PlaneExtractionParams& p = {}) {
    return assemble_layout(extract_vertical_planes(cloud, p), min_door_width);
}

namespace detail {

inline std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
    std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
        return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
    });
    if (pts.size() < 3) return pts;
    auto cross = [](const Vec2& o, const Vec2& a, const Vec2& b) {
        return (a - o).x() * (b - o).y() - (a - o).y() * (b - o).x();
    };
    std::vector<Vec2> h(2 * pts.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        while (k >= 2 && cross(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
        h[k++] = pts[i];
    }
    for (std::size_t i = pts.size() - 1, t = k + 1; i > 0; --i) {
        while (k >= t && cross(h[k - 2], h[k - 1], pts[i - 1]) <= 0) --k;
        h[k++] = pts[i - 1];
    }
    h.resize(k - 1);
    return h;
}

}  // namespace detail

/// Turns an extracted layout into a building: the four longest lines form
/// the outer loop, anything else is taken as the pedestal outline.
inline BuildingLayout layout_to_building(const LayoutEstimate& est, double wall_height = 3.0,
                                         double pedestal_height = 1.2) {
    if (est.wall_lines.size() < 4) throw Error(ErrorKind::insufficient_points, "fewer than four wall lines found");
    std::vector<std::size_t> order(est.wall_lines.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return est.wall_lines[a].length() > est.wall_lines[b].length();
    });
    std::vector<std::size_t> outer(order.begin(), order.begin() + 4);
    Vec2 c = Vec2::Zero();
    for (std::size_t i : outer) c += 0.5 * (est.wall_lines[i].a + est.wall_lines[i].b) / 4.0;
    std::sort(outer.begin(), outer.end(), [&](std::size_t a, std::size_t b) {
        const Vec2 ma = 0.5 * (est.wall_lines[a].a + est.wall_lines[a].b) - c;
        const Vec2 mb = 0.5 * (est.wall_lines[b].a + est.wall_lines[b].b) - c;
        return std::atan2(ma.y(), ma.x()) < std::atan2(mb.y(), mb.x());
    });
    std::vector<detail::Line2> lines;
    for (std::size_t i : outer) {
        const WallLine& w = est.wall_lines[i];
        lines.push_back({w.a, w.direction()});
    }
    std::vector<Vec2> corners;
    for (std::size_t i = 0; i < 4; ++i) {
        const auto x = detail::intersect(lines[(i + 3) % 4], lines[i]);
        if (!x) throw Error(ErrorKind::insufficient_points, "outer walls do not close");
        corners.push_back(*x);
    }
    BuildingLayout b;
    // wall i runs from the corner it shares with wall i-1 to the one it shares with wall i+1
    for (std::size_t i = 0; i < 4; ++i) b.outer_walls.push_back({corners[i], corners[(i + 1) % 4], wall_height});
    if (polygon_signed_area(outer_loop_polygon(b)) < 0.0) {
        throw Error(ErrorKind::insufficient_points, "outer walls are not counter-clockwise");
    }
    for (const LayoutGap& g : est.gaps) {
        for (std::size_t i = 0; i < 4; ++i) {
            if (est.wall_lines[outer[i]].line != g.line) continue;
            const WallSegment& w = b.outer_walls[i];
            b.door_gaps.push_back({static_cast<int>(i), (g.center - w.p0).dot(w.direction()), g.width});
        }
    }
    std::vector<Vec2> rest;
    for (std::size_t k = 4; k < order.size(); ++k) {
        const WallLine& w = est.wall_lines[order[k]];
        const Vec2 mid = 0.5 * (w.a + w.b);
        bool near_outer = false;
        for (const auto& l : lines) near_outer = near_outer || l.distance(mid) < 0.5;
        if (near_outer) continue;  // fixtures mounted on the walls
        rest.push_back(est.wall_lines[order[k]].a);
        rest.push_back(est.wall_lines[order[k]].b);
    }
    if (rest.size() >= 3) {
        b.pedestal = detail::convex_hull(rest);
        b.pedestal_height = pedestal_height;
    }
    return b;
}

// ---------------------------------------------------------------- grid

enum class Cell : std::uint8_t { free = 0, occupied = 1, unknown = 2 };

class OccupancyGrid {
public:
    OccupancyGrid(Vec2 origin, int width, int height, double resolution, double inflation_radius)
        : origin_(origin), width_(width), height_(height), resolution_(resolution), inflation_(inflation_radius) {
        if (!(resolution > 0.0)) throw Error(ErrorKind::invalid_argument, "resolution must be positive");
        if (width <= 0 || height <= 0) throw Error(ErrorKind::invalid_argument, "grid must be non-empty");
        if (!(inflation_radius >= 0.0)) throw Error(ErrorKind::invalid_argument, "inflation must be non-negative");
        cells_.assign(static_cast<std::size_t>(width) * height, Cell::unknown);
        blocked_.assign(cells_.size(), 0);
        const int r = static_cast<int>(std::floor(inflation_ / resolution_ + 1e-9));
        for (int dy = -r; dy <= r; ++dy) {
            for (int dx = -r; dx <= r; ++dx) {
                if (std::hypot(dx, dy) * resolution_ <= inflation_ + 1e-9) disk_.emplace_back(dx, dy);
            }
        }
    }

    int width() const { return width_; }
    int height() const { return height_; }
    double resolution() const { return resolution_; }
    double inflation_radius() const { return inflation_; }
    Vec2 origin() const { return origin_; }

    bool in_bounds(int cx, int cy) const { return cx >= 0 && cy >= 0 && cx < width_ && cy < height_; }
    std::size_t index(int cx, int cy) const { return static_cast<std::size_t>(cy) * width_ + cx; }

    std::pair<int, int> cell_of(const Vec2& p) const {
        return {static_cast<int>(std::floor((p.x() - origin_.x()) / resolution_)),
                static_cast<int>(std::floor((p.y() - origin_.y()) / resolution_))};
    }
    Vec2 center_of(int cx, int cy) const {
        return origin_ + Vec2((cx + 0.5) * resolution_, (cy + 0.5) * resolution_);
    }

    Cell cell(int cx, int cy) const { return cells_[index(cx, cy)]; }

    /// Occupied or within the inflation radius of an occupied cell; outside
    /// the grid counts as blocked.
    bool blocked(int cx, int cy) const { return !in_bounds(cx, cy) || blocked_[index(cx, cy)] != 0; }
    bool blocked(const Vec2& p) const {
        const auto [cx, cy] = cell_of(p);
        return blocked(cx, cy);
    }

    void set_free(int cx, int cy) {
        if (in_bounds(cx, cy) && cells_[index(cx, cy)] == Cell::unknown) cells_[index(cx, cy)] = Cell::free;
    }

    void mark_occupied(int cx, int cy) {
        if (!in_bounds(cx, cy) || cells_[index(cx, cy)] == Cell::occupied) return;
        cells_[index(cx, cy)] = Cell::occupied;
        for (const auto& [dx, dy] : disk_) {
            const int x = cx + dx, y = cy + dy;
            if (in_bounds(x, y)) blocked_[index(x, y)] = 1;
        }
    }
    void mark_occupied(const Vec2& p) {
        const auto [cx, cy] = cell_of(p);
        mark_occupied(cx, cy);
    }

    void mark_segment(const Vec2& a, const Vec2& b) {
        const double len = (b - a).norm();
        const int n = std::max(1, static_cast<int>(std::ceil(len / (0.5 * resolution_))));
        for (int i = 0; i <= n; ++i) mark_occupied(a + (b - a) * (static_cast<double>(i) / n));
    }

    void fill_polygon(const std::vector<Vec2>& poly) {
        if (poly.size() < 3) return;
        for (std::size_t i = 0; i < poly.size(); ++i) mark_segment(poly[i], poly[(i + 1) % poly.size()]);
        for (int cy = 0; cy < height_; ++cy) {
            for (int cx = 0; cx < width_; ++cx) {
                if (point_in_polygon(poly, center_of(cx, cy))) mark_occupied(cx, cy);
            }
        }
    }

private:
    Vec2 origin_;
    int width_, height_;
    double resolution_, inflation_;
    std::vector<Cell> cells_;
    std::vector<std::uint8_t> blocked_;
    std::vector<std::pair<int, int>> disk_;
};

/// Grid covering the building plus `margin` on every side.
inline OccupancyGrid empty_grid_around(const BuildingLayout& layout, double resolution, double inflation,
                                       double margin, const std::vector<Vec2>& extra_points = {}) {
    Vec2 lo(1e300, 1e300), hi(-1e300, -1e300);
    auto grow = [&](const Vec2& p) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    };
    for (const auto& w : layout.outer_walls) {
        grow(w.p0);
        grow(w.p1);
    }
    for (const auto& p : extra_points) grow(p);
    lo -= Vec2(margin, margin);
    hi += Vec2(margin, margin);
    const int w = static_cast<int>(std::ceil((hi.x() - lo.x()) / resolution));
    const int h = static_cast<int>(std::ceil((hi.y() - lo.y()) / resolution));
    return OccupancyGrid(lo, w, h, resolution, inflation);
}

/// Walls and pedestal occupied and inflated; everything else free, door gaps included.
inline OccupancyGrid build_occupancy_grid(const BuildingLayout& layout, double resolution, double inflation,
                                          double margin = 3.0, const std::vector<Vec2>& extra_points = {}) {
    OccupancyGrid g = empty_grid_around(layout, resolution, inflation, margin, extra_points);
    for (int cy = 0; cy < g.height(); ++cy) {
        for (int cx = 0; cx < g.width(); ++cx) g.set_free(cx, cy);
    }
    for (const WallSegment& w : solid_wall_pieces(layout)) g.mark_segment(w.p0, w.p1);
    g.fill_polygon(layout.pedestal);
    return g;
}

/// Adds the returns of a planar scan taken at `pose`.
inline void integrate_scan(OccupancyGrid& g, const Pose2D& pose, const Scan2D& scan) {
    for (std::size_t i = 0; i < scan.ranges.size(); ++i) {
        const double r = scan.ranges[i];
        if (!(r > 0.0)) continue;
        const double a = pose.heading + scan.angles[i];
        g.mark_occupied(Vec2(pose.x + r * std::cos(a), pose.y + r * std::sin(a)));
    }
}

// ---------------------------------------------------------------- A*

struct PlannedPath {
    std::vector<Pose2D> poses;                // decimated
    std::vector<std::pair<int, int>> cells;   // every grid cell visited
    double cost = 0.0;                        // metres
};

namespace detail {

inline constexpr int kDx[8] = {1, -1, 0, 0, 1, 1, -1, -1};
inline constexpr int kDy[8] = {0, 0, 1, -1, 1, -1, 1, -1};

inline double octile(int dx, int dy) {
    dx = std::abs(dx);
    dy = std::abs(dy);
    return std::max(dx, dy) + (std::sqrt(2.0) - 1.0) * std::min(dx, dy);
}

/// Cost in metres of a cell chain, summed as straight + diagonal counts so
/// equal-cost chains always give bit-identical totals.
inline double chain_cost(const std::vector<std::pair<int, int>>& cells, double res) {
    long straight = 0, diag = 0;
    for (std::size_t i = 1; i < cells.size(); ++i) {
        const bool d = cells[i].first != cells[i - 1].first && cells[i].second != cells[i - 1].second;
        (d ? diag : straight) += 1;
    }
    return (static_cast<double>(straight) + static_cast<double>(diag) * std::sqrt(2.0)) * res;
}

inline bool line_of_sight(const OccupancyGrid& g, const Vec2& a, const Vec2& b) {
    const double len = (b - a).norm();
    const int n = std::max(1, static_cast<int>(std::ceil(len / (0.25 * g.resolution()))));
    for (int i = 0; i <= n; ++i) {
        if (g.blocked(a + (b - a) * (static_cast<double>(i) / n))) return false;
    }
    return true;
}

}  // namespace detail

/// Nearest unblocked cell to `p` (breadth-first), or nullopt when none is within `max_radius`.
inline std::optional<Vec2> nearest_free(const OccupancyGrid& g, const Vec2& p, double max_radius) {
    const auto [sx, sy] = g.cell_of(p);
    const int r = static_cast<int>(std::ceil(max_radius / g.resolution()));
    std::optional<Vec2> best;
    double best_d = std::numeric_limits<double>::infinity();
    for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
            const int x = sx + dx, y = sy + dy;
            if (g.blocked(x, y)) continue;
            const double d = (g.center_of(x, y) - p).norm();
            if (d <= max_radius && d < best_d) {
                best_d = d;
                best = g.center_of(x, y);
            }
        }
    }
    return best;
}

/// 8-connected A* with the octile heuristic. The returned poses are spaced
/// at least `min_spacing` apart and joined by straight runs in free space.
inline PlannedPath plan_path(const OccupancyGrid& g, const Pose2D& start, const Pose2D& goal,
                             double min_spacing = 0.25) {
    const auto [sx, sy] = g.cell_of(start.position());
    const auto [gx, gy] = g.cell_of(goal.position());
    if (g.blocked(sx, sy)) throw Error(ErrorKind::invalid_argument, "start cell is occupied");
    if (g.blocked(gx, gy)) throw Error(ErrorKind::goal_occupied, "goal cell is occupied");

    const std::size_t n = static_cast<std::size_t>(g.width()) * g.height();
    std::vector<double> gcost(n, std::numeric_limits<double>::infinity());
    std::vector<std::int32_t> parent(n, -1);
    std::vector<std::uint8_t> closed(n, 0);
    using Item = std::pair<double, std::int64_t>;  // (f, tie-break key)
    std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
    const std::size_t s = g.index(sx, sy), t = g.index(gx, gy);
    gcost[s] = 0.0;
    open.push({detail::octile(gx - sx, gy - sy), static_cast<std::int64_t>(s)});
    while (!open.empty()) {
        const auto [f, key] = open.top();
        open.pop();
        const std::size_t cur = static_cast<std::size_t>(key);
        if (closed[cur]) continue;
        closed[cur] = 1;
        if (cur == t) break;
        const int cx = static_cast<int>(cur % g.width()), cy = static_cast<int>(cur / g.width());
        for (int k = 0; k < 8; ++k) {
            const int nx = cx + detail::kDx[k], ny = cy + detail::kDy[k];
            if (g.blocked(nx, ny)) continue;
            const std::size_t ni = g.index(nx, ny);
            if (closed[ni]) continue;
            const double ng = gcost[cur] + (k < 4 ? 1.0 : std::sqrt(2.0));
            if (ng < gcost[ni]) {
                gcost[ni] = ng;
                parent[ni] = static_cast<std::int32_t>(cur);
                open.push({ng + detail::octile(gx - nx, gy - ny), static_cast<std::int64_t>(ni)});
            }
        }
    }
    if (!closed[t]) throw Error(ErrorKind::no_path, "no collision-free path to the goal");

    PlannedPath path;
    for (std::int64_t c = static_cast<std::int64_t>(t); c >= 0; c = parent[static_cast<std::size_t>(c)]) {
        path.cells.emplace_back(static_cast<int>(c % g.width()), static_cast<int>(c / g.width()));
        if (static_cast<std::size_t>(c) == s) break;
    }
    std::reverse(path.cells.begin(), path.cells.end());
    path.cost = detail::chain_cost(path.cells, g.resolution());

    std::vector<Vec2> pts;
    pts.push_back(start.position());
    for (std::size_t i = 1; i + 1 < path.cells.size(); ++i) pts.push_back(g.center_of(path.cells[i].first, path.cells[i].second));
    if (path.cells.size() > 1) pts.push_back(goal.position());

    std::vector<Vec2> kept{pts.front()};
    std::size_t last = 0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        const bool is_goal = i + 1 == pts.size();
        if ((pts[i] - pts[last]).norm() >= min_spacing || is_goal) {
            if (!detail::line_of_sight(g, pts[last], pts[i]) && i - 1 > last) {
                kept.push_back(pts[i - 1]);
                last = i - 1;
            }
            if (is_goal && kept.size() > 1 && (pts[i] - kept.back()).norm() < min_spacing &&
                detail::line_of_sight(g, kept[kept.size() - 2], pts[i])) {
                kept.back() = pts[i];
            } else {
                kept.push_back(pts[i]);
            }
            last = i;
        }
    }
    for (std::size_t i = 0; i < kept.size(); ++i) {
        double h = goal.heading;
        if (i + 1 < kept.size()) {
            const Vec2 d = kept[i + 1] - kept[i];
            h = std::atan2(d.y(), d.x());
        }
        path.poses.emplace_back(kept[i].x(), kept[i].y(), h);
    }
    if (path.poses.size() == 1) path.poses.front() = goal;
    return path;
}

// ---------------------------------------------------------------- waypoints

enum class WaypointContext { outdoor, door, indoor_search };
enum class CameraSide { left, right };

struct Waypoint {
    Pose2D pose;
    WaypointContext context = WaypointContext::indoor_search;
};

struct WaypointList {
    std::vector<Waypoint> waypoints;
    CameraSide camera_side = CameraSide::left;
};

namespace detail {

/// Offsets every edge of a counter-clockwise convex polygon by `d` along its
/// left normal (inwards for d > 0) and intersects neighbours.
inline std::vector<Vec2> offset_polygon(const std::vector<Vec2>& poly, double d) {
    const std::size_t n = poly.size();
    std::vector<Line2> lines;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 dir = (poly[(i + 1) % n] - poly[i]).normalized();
        const Vec2 nrm(-dir.y(), dir.x());
        lines.push_back({poly[i] + d * nrm, dir});
    }
    std::vector<Vec2> out;
    for (std::size_t i = 0; i < n; ++i) {
        const auto x = intersect(lines[(i + n - 1) % n], lines[i]);
        if (!x) throw Error(ErrorKind::standoff_infeasible, "parallel consecutive edges");
        out.push_back(*x);
    }
    return out;
}

/// Samples the closed polygon at `spacing`, walking it in the given vertex
/// order; each pose heads along its edge. The first pose is repeated last.
inline std::vector<Waypoint> sample_loop(const std::vector<Vec2>& loop, double spacing) {
    std::vector<Waypoint> out;
    for (std::size_t i = 0; i < loop.size(); ++i) {
        const Vec2 a = loop[i], b = loop[(i + 1) % loop.size()];
        const double len = (b - a).norm();
        const Vec2 dir = (b - a) / len;
        const double h = std::atan2(dir.y(), dir.x());
        const int n = std::max(1, static_cast<int>(std::ceil(len / spacing - 1e-9)));
        for (int k = 0; k < n; ++k) {
            const Vec2 p = a + dir * (len * k / n);
            out.push_back({Pose2D(p.x(), p.y(), h), WaypointContext::indoor_search});
        }
    }
    out.push_back(out.front());
    return out;
}

}  // namespace detail

/// Clockwise loop at `standoff` from the outer walls. Travelling clockwise
/// keeps the walls on the robot's left.
inline WaypointList generate_wall_following_waypoints(const BuildingLayout& layout, double standoff,
                                                      CameraSide camera_side = CameraSide::left,
                                                      double spacing = 0.5) {
    const std::vector<Vec2> poly = outer_loop_polygon(layout);
    if (poly.size() < 3) throw Error(ErrorKind::standoff_infeasible, "layout has no outer loop");
    const std::vector<Vec2> inner = detail::offset_polygon(poly, standoff);
    // an inset that flips orientation or collapses means the room is too small
    const double a0 = polygon_signed_area(poly), a1 = polygon_signed_area(inner);
    bool ok = a1 > 1e-6 && a1 < a0;
    for (std::size_t i = 0; ok && i < poly.size(); ++i) {
        const Vec2 e0 = poly[(i + 1) % poly.size()] - poly[i];
        const Vec2 e1 = inner[(i + 1) % inner.size()] - inner[i];
        ok = e0.dot(e1) > 1e-9;
    }
    if (!ok) throw Error(ErrorKind::standoff_infeasible, "standoff too large for the room");
    std::vector<Vec2> cw(inner.rbegin(), inner.rend());
    return {detail::sample_loop(cw, spacing), camera_side};
}

/// Clockwise loop at `standoff` around the pedestal; the pedestal stays on the right.
inline WaypointList generate_pedestal_waypoints(const BuildingLayout& layout, double standoff, double spacing = 0.5) {
    if (layout.pedestal.size() < 3) throw Error(ErrorKind::standoff_infeasible, "layout has no pedestal");
    std::vector<Vec2> ped = layout.pedestal;
    if (polygon_signed_area(ped) < 0.0) std::reverse(ped.begin(), ped.end());
    const std::vector<Vec2> outer = detail::offset_polygon(ped, -standoff);
    std::vector<Vec2> cw(outer.rbegin(), outer.rend());
    return {detail::sample_loop(cw, spacing), CameraSide::right};
}

/// Rotates a closed loop so it starts at the waypoint nearest to `p`.
inline WaypointList start_loop_near(const WaypointList& loop, const Vec2& p) {
    if (loop.waypoints.size() < 2) return loop;
    std::vector<Waypoint> open(loop.waypoints.begin(), loop.waypoints.end() - 1);
    std::size_t best = 0;
    for (std::size_t i = 1; i < open.size(); ++i) {
        if ((open[i].pose.position() - p).norm() < (open[best].pose.position() - p).norm()) best = i;
    }
    std::rotate(open.begin(), open.begin() + static_cast<std::ptrdiff_t>(best), open.end());
    open.push_back(open.front());
    return {open, loop.camera_side};
}

/// Outside approach, gap center and inside point for the given door.
inline std::vector<Waypoint> door_waypoints(const BuildingLayout& layout, const DoorGap& gap, double depth = 1.0) {
    const WallSegment& w = layout.outer_walls.at(static_cast<std::size_t>(gap.wall_index));
    const Vec2 c = gap_center(layout, gap);
    const Vec2 n = w.left_normal();
    const double h = std::atan2(n.y(), n.x());
    const Vec2 out = c - depth * n, in = c + depth * n;
    return {{Pose2D(out.x(), out.y(), h), WaypointContext::outdoor},
            {Pose2D(c.x(), c.y(), h), WaypointContext::door},
            {Pose2D(in.x(), in.y(), h), WaypointContext::door}};
}

/// Each waypoint displaced by `error` metres in a random direction, emulating
/// coordinates set by hand from a rough map.
inline std::vector<Waypoint> perturb_waypoints(std::vector<Waypoint> wps, double error, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> ang(-kPi, kPi);
    for (Waypoint& w : wps) {
        const double a = ang(rng);
        w.pose = Pose2D(w.pose.x + error * std::cos(a), w.pose.y + error * std::sin(a), w.pose.heading);
    }
    return wps;
}

// ---------------------------------------------------------------- pure pursuit

struct PursuitCommand {
    double v = 0.0;
    double omega = 0.0;
    bool reached = false;
};

inline constexpr double kGoalTolerance = 0.15;

/// Tracks a polyline, remembering progress so self-approaching loops are
/// followed in order.
class PathTracker {
public:
    PathTracker() = default;
    explicit PathTracker(std::vector<Vec2> path) : path_(std::move(path)) {
        if (path_.empty()) throw Error(ErrorKind::invalid_argument, "path must be non-empty");
    }

    const std::vector<Vec2>& path() const { return path_; }
    bool empty() const { return path_.empty(); }
    std::size_t segment() const { return seg_; }

    PursuitCommand step(const Pose2D& pose, double lookahead, double speed_cap,
                        double max_yaw_rate = std::numeric_limits<double>::infinity()) {
        const Vec2 p = pose.position();
        const Vec2 goal = path_.back();
        const double to_goal = (goal - p).norm();
        if (to_goal <= kGoalTolerance && seg_ + 2 >= path_.size()) return {0.0, 0.0, true};

        // advance along the path while the next segment is at least as close
        const std::size_t window = std::min(path_.size() - 1, seg_ + 6);
        double best_d = std::numeric_limits<double>::infinity();
        std::size_t best_seg = seg_;
        double best_s = 0.0;
        for (std::size_t i = seg_; i < std::max(window, seg_ + 1) && i + 1 < path_.size(); ++i) {
            const Vec2 a = path_[i], b = path_[i + 1];
            const double len2 = (b - a).squaredNorm();
            const double s = len2 > 0 ? std::clamp((p - a).dot(b - a) / len2, 0.0, 1.0) : 0.0;
            const double d = (a + s * (b - a) - p).norm();
            if (d < best_d - 1e-12) {
                best_d = d;
                best_seg = i;
                best_s = s;
            }
        }
        seg_ = best_seg;

        Vec2 target = goal;
        if (path_.size() >= 2) {
            double remaining = lookahead;
            Vec2 from = path_[seg_] + best_s * (path_[seg_ + 1] - path_[seg_]);
            for (std::size_t i = seg_ + 1; i < path_.size(); ++i) {
                const double len = (path_[i] - from).norm();
                if (len >= remaining) {
                    target = from + (path_[i] - from) * (remaining / len);
                    break;
                }
                remaining -= len;
                from = path_[i];
            }
        }
        return pursue(pose, target, lookahead, speed_cap, max_yaw_rate, to_goal);
    }

    static PursuitCommand pursue(const Pose2D& pose, const Vec2& target, double lookahead, double speed_cap,
                                 double max_yaw_rate, double to_goal) {
        const Vec2 rel = pose.to_body(target);
        const double alpha = std::atan2(rel.y(), rel.x());
        if (std::abs(alpha) > kPi / 2.0) {
            // target behind: turn on the spot
            const double w = std::isfinite(max_yaw_rate) ? max_yaw_rate : 1.0;
            return {0.0, alpha > 0 ? w : -w, false};
        }
        double v = std::min(speed_cap, 0.1 + 1.0 * to_goal);
        v = std::min(v, speed_cap);
        double omega = 2.0 * v * std::sin(alpha) / lookahead;
        if (std::abs(omega) > max_yaw_rate) {
            v *= max_yaw_rate / std::abs(omega);
            omega = omega > 0 ? max_yaw_rate : -max_yaw_rate;
        }
        return {v, omega, false};
    }

private:
    std::vector<Vec2> path_;
    std::size_t seg_ = 0;
};

inline std::vector<Vec2> positions(const std::vector<Pose2D>& poses) {
    std::vector<Vec2> out;
    out.reserve(poses.size());
    for (const auto& p : poses) out.push_back(p.position());
    return out;
}

/// Stateless pure-pursuit step: omega = 2 v sin(alpha) / L toward the point
/// one lookahead further along the path than the closest point.
inline PursuitCommand pure_pursuit_step(const Pose2D& est_pose, const std::vector<Pose2D>& path, double lookahead,
                                        double speed_cap,
                                        double max_yaw_rate = std::numeric_limits<double>::infinity()) {
    if (path.empty()) throw Error(ErrorKind::invalid_argument, "path must be non-empty");
    std::vector<Vec2> pts = positions(path);
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const double d = point_segment_distance(est_pose.position(), pts[i], pts[i + 1]);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    std::vector<Vec2> tail(pts.begin() + static_cast<std::ptrdiff_t>(best), pts.end());
    PathTracker tr(tail);
    return tr.step(est_pose, lookahead, speed_cap, max_yaw_rate);
}

// ---------------------------------------------------------------- export

inline nlohmann::json layout_json(const LayoutEstimate& est) {
    nlohmann::json j;
    j["wall_lines"] = nlohmann::json::array();
    for (const auto& w : est.wall_lines) {
        j["wall_lines"].push_back({{"a", {w.a.x(), w.a.y()}}, {"b", {w.b.x(), w.b.y()}}, {"line", w.line}});
    }
    j["gaps"] = nlohmann::json::array();
    for (const auto& g : est.gaps) {
        j["gaps"].push_back({{"line", g.line}, {"center", {g.center.x(), g.center.y()}}, {"width", g.width}});
    }
    return j;
}

inline const char* to_string(WaypointContext c) {
    switch (c) {
        case WaypointContext::outdoor: return "outdoor";
        case WaypointContext::door: return "door";
        case WaypointContext::indoor_search: return "indoor_search";
    }
    return "?";
}

inline nlohmann::json waypoints_json(const std::vector<Waypoint>& wps) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& w : wps) {
        j.push_back({{"x", w.pose.x}, {"y", w.pose.y}, {"heading", w.pose.heading}, {"context", to_string(w.context)}});
    }
    return j;
}

/// 8-bit graymap: free 255, inflated 160, occupied 0, unknown 100; row 0 is the top (max y).
inline void write_grid_pgm(std::ostream& out, const OccupancyGrid& g) {
    out << "P5\n" << g.width() << " " << g.height() << "\n255\n";
    for (int cy = g.height() - 1; cy >= 0; --cy) {
        for (int cx = 0; cx < g.width(); ++cx) {
            unsigned char c = 255;
            if (g.cell(cx, cy) == Cell::occupied) c = 0;
            else if (g.blocked(cx, cy)) c = 160;
            else if (g.cell(cx, cy) == Cell::unknown) c = 100;
            out.put(static_cast<char>(c));
        }
    }
}

}  // namespace firebot
