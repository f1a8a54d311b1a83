#pragma once

// Hot-spot detection in thermal frames and thermal/depth fusion.

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "firebot/error.hpp"
#include "firebot/geometry.hpp"
#include "firebot/sensors.hpp"

namespace firebot {

struct HotspotDetection {
    double u = 0.0;  // centroid, px
    double v = 0.0;
    double peak_temp = 0.0;
    int pixel_count = 0;
    int u_min = 0, u_max = 0, v_min = 0, v_max = 0;  // inclusive bounding box
    UnitRay ray;  // thermal optical frame
    double timestamp = 0.0;

    int width() const { return u_max - u_min + 1; }
    int height() const { return v_max - v_min + 1; }
};

struct TargetEstimate {
    Vec3 position = Vec3::Zero();  // thermal optical frame
    double range = 0.0;            // along the detection ray
    double timestamp = 0.0;
    int iterations = 0;
};

/// 4-connected components of pixels at or above `threshold`, largest first.
inline std::vector<HotspotDetection> detect_hotspots(const ThermalImage& img, const PinholeIntrinsics& k,
                                                     double threshold, int min_blob_pixels = 2) {
    const int w = img.width, h = img.height;
    std::vector<int> label(img.data.size(), -1);
    std::vector<HotspotDetection> out;
    std::vector<int> stack;
    for (int v0 = 0; v0 < h; ++v0) {
        for (int u0 = 0; u0 < w; ++u0) {
            const int start = v0 * w + u0;
            if (label[start] >= 0 || img.data[start] < threshold) continue;
            label[start] = 1;
            stack.assign(1, start);
            double su = 0.0, sv = 0.0, peak = -1e300;
            int n = 0, umin = u0, umax = u0, vmin = v0, vmax = v0;
            while (!stack.empty()) {
                const int idx = stack.back();
                stack.pop_back();
                const int u = idx % w, v = idx / w;
                su += u;
                sv += v;
                umin = std::min(umin, u);
                umax = std::max(umax, u);
                vmin = std::min(vmin, v);
                vmax = std::max(vmax, v);
                peak = std::max(peak, img.data[idx]);
                ++n;
                const int nb[4][2] = {{u - 1, v}, {u + 1, v}, {u, v - 1}, {u, v + 1}};
                for (const auto& p : nb) {
                    if (p[0] < 0 || p[0] >= w || p[1] < 0 || p[1] >= h) continue;
                    const int j = p[1] * w + p[0];
                    if (label[j] < 0 && img.data[j] >= threshold) {
                        label[j] = 1;
                        stack.push_back(j);
                    }
                }
            }
            if (n < min_blob_pixels) continue;
            HotspotDetection d;
            d.u = su / n;
            d.v = sv / n;
            d.peak_temp = peak;
            d.pixel_count = n;
            d.u_min = umin;
            d.u_max = umax;
            d.v_min = vmin;
            d.v_max = vmax;
            d.ray = backproject_pixel(k, d.u, d.v);
            d.timestamp = img.timestamp;
            out.push_back(d);
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const HotspotDetection& a, const HotspotDetection& b) {
        if (a.pixel_count != b.pixel_count) return a.pixel_count > b.pixel_count;
        if (a.peak_temp != b.peak_temp) return a.peak_temp > b.peak_temp;
        return a.u < b.u;
    });
    return out;
}

/// Largest blob; ties go to the hotter one, then the one further left.
inline std::optional<HotspotDetection> select_target(const std::vector<HotspotDetection>& dets) {
    if (dets.empty()) return std::nullopt;
    return *std::min_element(dets.begin(), dets.end(), [](const HotspotDetection& a, const HotspotDetection& b) {
        if (a.pixel_count != b.pixel_count) return a.pixel_count > b.pixel_count;
        if (a.peak_temp != b.peak_temp) return a.peak_temp > b.peak_temp;
        return a.u < b.u;
    });
}

/// Median of the non-zero depth readings in a 5x5 window around (u, v).
inline std::optional<double> median_depth(const DepthImage& depth, double u, double v) {
    const int cu = static_cast<int>(std::lround(u)), cv = static_cast<int>(std::lround(v));
    double vals[25];
    int n = 0;
    for (int dv = -2; dv <= 2; ++dv) {
        for (int du = -2; du <= 2; ++du) {
            const int x = cu + du, y = cv + dv;
            if (x < 0 || x >= depth.width || y < 0 || y >= depth.height) continue;
            const double r = depth.at(x, y);
            if (r > 0.0) vals[n++] = r;
        }
    }
    if (n == 0) return std::nullopt;
    std::sort(vals, vals + n);
    return n % 2 ? vals[n / 2] : 0.5 * (vals[n / 2 - 1] + vals[n / 2]);
}

/// Depth pixels that can see points of the detection ray between `near`
/// and `far`, padded by `pad` px; the only part of the depth frame the
/// fusion below ever reads.
inline PixelWindow ray_window(const HotspotDetection& det, const Transform3D& depth_from_thermal,
                              const PinholeIntrinsics& depth_intr, double near = 0.3, double far = 10.0, int pad = 4) {
    PixelWindow win{depth_intr.width, depth_intr.height, 0, 0};
    const int steps = 32;
    for (int i = 0; i <= steps; ++i) {
        const double d = near * std::pow(far / near, static_cast<double>(i) / steps);
        const Vec3 p = apply(depth_from_thermal, d * det.ray.direction);
        if (!(p.z() > 1e-6)) continue;
        const auto [u, v] = project_point(depth_intr, p);
        win.u0 = std::min(win.u0, static_cast<int>(std::floor(u)) - pad);
        win.v0 = std::min(win.v0, static_cast<int>(std::floor(v)) - pad);
        win.u1 = std::max(win.u1, static_cast<int>(std::ceil(u)) + pad + 1);
        win.v1 = std::max(win.v1, static_cast<int>(std::ceil(v)) + pad + 1);
    }
    return win;
}

/// Iterative parallax correction. `depth_from_thermal` maps thermal-frame
/// points into the depth camera frame.
inline TargetEstimate localize_target(const HotspotDetection& det, const DepthImage& depth,
                                      const Transform3D& depth_from_thermal, const PinholeIntrinsics& depth_intr,
                                      double initial_range = 2.0, double tolerance = 0.005, int max_iterations = 10) {
    if (std::abs(det.timestamp - depth.timestamp) > 0.15) {
        throw Error(ErrorKind::invalid_argument, "thermal and depth frames are more than 150 ms apart");
    }
    const Transform3D thermal_from_depth = invert(depth_from_thermal);
    const Vec3 dir = det.ray.direction.normalized();
    double d = initial_range;
    int it = 0;
    while (it < max_iterations) {
        ++it;
        const Vec3 p_depth = apply(depth_from_thermal, d * dir);
        if (!(p_depth.z() > 0.0)) throw Error(ErrorKind::out_of_frustum, "target is behind the depth camera");
        const auto [u, v] = project_point(depth_intr, p_depth);
        if (!depth_intr.contains(u, v)) throw Error(ErrorKind::out_of_frustum, "re-projection leaves the depth image");
        const auto r = median_depth(depth, u, v);
        if (!r) throw Error(ErrorKind::no_depth, "no depth return around the re-projected pixel");
        // range reading lies along the depth pixel ray; express it along the thermal ray
        const Vec3 q = apply(thermal_from_depth, *r * p_depth.normalized());
        const double next = q.dot(dir);
        const bool done = std::abs(next - d) < tolerance;
        d = next;
        if (done) break;
    }
    if (!(d > 0.1 && d <= 10.0)) throw Error(ErrorKind::no_depth, "fused range outside the sensor interval");
    return {d * dir, d, det.timestamp, it};
}

}  // namespace firebot
