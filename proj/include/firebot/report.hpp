#pragma once

// Single runs and seed batches: report.json, trajectory.csv and events.csv
// per run, summary.json per batch.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "firebot/error.hpp"
#include "firebot/mapping.hpp"
#include "firebot/mission.hpp"
#include "firebot/scenario_io.hpp"
#include "firebot/world.hpp"

namespace firebot {

struct RunConfig {
    std::filesystem::path scenario_path;
    std::uint64_t seed = 0;
    std::filesystem::path out_dir;
    std::optional<bool> fine_alignment;  // unset keeps the scenario's choice
    std::optional<WaypointSource> waypoints;
    bool dump_frames = false;
    double pace = 0.0;  // > 0 replays at this multiple of wall-clock time
};

struct RunReport {
    std::string terminal;
    bool completed = false;  // terminal state reached (MissionDone or MissionFailed)
    bool success = false;    // every target extinguished
    double duration = 0.0;
    double liters_ejected = 0.0;
    std::vector<double> liters_through;
    std::vector<bool> extinguished;
    int detections = 0;
    int target_estimates = 0;
    int waypoints_completed = 0;
    int indoor_waypoints_completed = 0;
    int pump_cycles = 0;
    std::vector<std::string> states;
    std::string failure_reason;
    std::string event_log = "events.csv";
    std::uint64_t seed = 0;
};

inline nlohmann::json report_json(const RunReport& r) {
    nlohmann::json j;
    j["seed"] = r.seed;
    j["terminal"] = r.terminal;
    j["completed"] = r.completed;
    j["success"] = r.success;
    j["duration_s"] = r.duration;
    j["liters_ejected"] = r.liters_ejected;
    j["liters_through"] = r.liters_through;
    j["extinguished"] = r.extinguished;
    j["detections"] = r.detections;
    j["target_estimates"] = r.target_estimates;
    j["waypoints_completed"] = r.waypoints_completed;
    j["indoor_waypoints_completed"] = r.indoor_waypoints_completed;
    j["pump_cycles"] = r.pump_cycles;
    j["states"] = r.states;
    j["failure_reason"] = r.failure_reason;
    j["event_log"] = r.event_log;
    return j;
}

inline RunReport make_report(const MissionResult& m, std::uint64_t seed) {
    RunReport r;
    r.seed = seed;
    r.terminal = m.terminal;
    r.completed = m.terminal == state::done || m.terminal == state::failed;
    r.duration = m.duration;
    r.liters_ejected = m.ledger.liters_ejected;
    r.liters_through = m.ledger.liters_through;
    r.success = !m.targets.empty();
    for (const FireTarget& t : m.targets) {
        r.extinguished.push_back(t.extinguished);
        r.success = r.success && t.extinguished;
    }
    r.detections = m.stats.detection_frames;
    r.target_estimates = m.stats.target_estimates;
    r.waypoints_completed = m.stats.waypoints_completed;
    r.indoor_waypoints_completed = m.stats.indoor_waypoints_completed;
    r.pump_cycles = m.stats.pump_cycles;
    r.states = visited_states(m.log);
    r.failure_reason = m.stats.failure_reason;
    return r;
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw Error(ErrorKind::io_error, "cannot write " + p.string());
    f << std::setprecision(10);
    return f;
}

inline void make_dir(const std::filesystem::path& p) {
    std::error_code ec;
    std::filesystem::create_directories(p, ec);
    if (ec || !std::filesystem::is_directory(p)) throw Error(ErrorKind::io_error, "cannot create " + p.string());
}

inline void write_trajectory(std::ostream& out, const std::vector<TrajectorySample>& tr) {
    out << "t,true_x,true_y,true_theta,est_x,est_y,est_theta\n";
    for (const auto& s : tr) {
        out << s.t << "," << s.true_pose.x << "," << s.true_pose.y << "," << s.true_pose.heading << ","
            << s.estimated_pose.x << "," << s.estimated_pose.y << "," << s.estimated_pose.heading << "\n";
    }
}

inline Scenario configured_scenario(const RunConfig& c) {
    Scenario s = load_scenario_file(c.scenario_path.string());
    s.seed = c.seed;
    if (c.fine_alignment) s.fine_alignment_enabled = *c.fine_alignment;
    if (c.waypoints) s.waypoint_source = *c.waypoints;
    return s;
}

}  // namespace detail

/// Runs one mission and writes its artifacts into `out_dir`.
inline RunReport run_mission(const Scenario& s, const std::filesystem::path& out_dir, bool dump_frames = false,
                             double pace = 0.0) {
    detail::make_dir(out_dir);
    std::optional<std::filesystem::path> frames;
    if (dump_frames) {
        frames = out_dir / "frames";
        detail::make_dir(*frames);
    }
    const MissionResult m = run_firefight(s, frames, pace);
    const RunReport r = make_report(m, s.seed);
    {
        auto f = detail::open_out(out_dir / "report.json");
        f << report_json(r).dump(2) << "\n";
    }
    {
        auto f = detail::open_out(out_dir / "trajectory.csv");
        detail::write_trajectory(f, m.trajectory);
    }
    {
        auto f = detail::open_out(out_dir / "events.csv");
        write_event_log(f, m.log);
    }
    if (m.layout) {
        auto f = detail::open_out(out_dir / "layout.json");
        f << layout_json(*m.layout).dump(2) << "\n";
    }
    return r;
}

inline RunReport run(const RunConfig& c) {
    if (c.out_dir.empty()) throw Error(ErrorKind::invalid_argument, "output directory is required");
    return run_mission(detail::configured_scenario(c), c.out_dir, c.dump_frames, c.pace);
}

struct BatchSummary {
    std::uint64_t first_seed = 0;
    std::uint64_t last_seed = 0;
    std::vector<RunReport> reports;
    std::vector<std::string> errors;  // per seed, empty when the run completed
    double success_rate = 0.0;
    double median_duration = 0.0;
    double median_liters_through = 0.0;
    bool all_completed = true;
};

inline double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Pure fold over the per-seed reports.
inline void summarize(BatchSummary& b) {
    int ok = 0;
    std::vector<double> dur, through;
    b.all_completed = true;
    for (std::size_t i = 0; i < b.reports.size(); ++i) {
        const RunReport& r = b.reports[i];
        if (!b.errors[i].empty() || !r.completed) {
            b.all_completed = false;
            continue;
        }
        ok += r.success;
        dur.push_back(r.duration);
        double sum = 0.0;
        for (double l : r.liters_through) sum += l;
        through.push_back(sum);
    }
    b.success_rate = b.reports.empty() ? 0.0 : static_cast<double>(ok) / static_cast<double>(b.reports.size());
    b.median_duration = median(dur);
    b.median_liters_through = median(through);
}

inline nlohmann::json summary_json(const BatchSummary& b) {
    nlohmann::json j;
    j["first_seed"] = b.first_seed;
    j["last_seed"] = b.last_seed;
    j["runs"] = b.reports.size();
    j["success_rate"] = b.success_rate;
    j["median_duration_s"] = b.median_duration;
    j["median_liters_through"] = b.median_liters_through;
    j["all_completed"] = b.all_completed;
    nlohmann::json seeds = nlohmann::json::array();
    for (std::size_t i = 0; i < b.reports.size(); ++i) {
        nlohmann::json e{{"seed", b.first_seed + i}};
        if (b.errors[i].empty()) {
            e["terminal"] = b.reports[i].terminal;
            e["success"] = b.reports[i].success;
            e["duration_s"] = b.reports[i].duration;
        } else {
            e["error"] = b.errors[i];
        }
        seeds.push_back(e);
    }
    j["seeds"] = seeds;
    return j;
}

/// Runs seeds [first, last] (inclusive) into out_dir/seed_<n>. Each seed is
/// independent, so `jobs` only changes wall-clock time.
inline BatchSummary batch(const RunConfig& c, std::uint64_t first, std::uint64_t last, unsigned jobs = 1) {
    if (last < first) throw Error(ErrorKind::invalid_argument, "empty seed range");
    if (c.out_dir.empty()) throw Error(ErrorKind::invalid_argument, "output directory is required");
    const Scenario base = detail::configured_scenario(c);
    detail::make_dir(c.out_dir);
    BatchSummary b;
    b.first_seed = first;
    b.last_seed = last;
    const std::size_t n = static_cast<std::size_t>(last - first + 1);
    b.reports.resize(n);
    b.errors.resize(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            Scenario s = base;
            s.seed = first + i;
            try {
                b.reports[i] = run_mission(s, c.out_dir / ("seed_" + std::to_string(s.seed)), c.dump_frames);
            } catch (const std::exception& e) {
                b.errors[i] = e.what();
                b.reports[i].seed = s.seed;
            }
        }
    };
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
    std::vector<std::thread> pool;
    for (unsigned k = 1; k < jobs; ++k) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    summarize(b);
    auto f = detail::open_out(c.out_dir / "summary.json");
    f << summary_json(b).dump(2) << "\n";
    return b;
}

/// Parses "a..b".
inline std::pair<std::uint64_t, std::uint64_t> parse_seed_range(const std::string& text) {
    const auto dots = text.find("..");
    if (dots == std::string::npos) throw Error(ErrorKind::invalid_argument, "seed range must look like a..b");
    try {
        std::size_t used = 0;
        const std::string a = text.substr(0, dots), b = text.substr(dots + 2);
        if (a.empty() || b.empty() || a[0] == '-' || b[0] == '-') throw std::invalid_argument("sign");
        const auto lo = std::stoull(a, &used);
        if (used != a.size()) throw std::invalid_argument("trailing");
        const auto hi = std::stoull(b, &used);
        if (used != b.size()) throw std::invalid_argument("trailing");
        if (hi < lo) throw Error(ErrorKind::invalid_argument, "empty seed range " + text);
        return {lo, hi};
    } catch (const std::logic_error&) {
        throw Error(ErrorKind::invalid_argument, "bad seed range " + text);
    }
}

}  // namespace firebot
