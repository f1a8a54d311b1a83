#include <cstdint>
#include <iostream>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "firebot/report.hpp"

namespace {

std::optional<firebot::WaypointSource> waypoint_flag(const std::string& v) {
    if (v.empty()) return std::nullopt;
    if (v == "hand") return firebot::WaypointSource::hand_set;
    return firebot::WaypointSource::extracted;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"firefighting UGV mission simulator"};
    app.require_subcommand(1);

    firebot::RunConfig cfg;
    std::string scenario, out, waypoints, seeds;
    std::uint64_t seed = 0;
    bool no_fine = false;
    bool dump = false;
    double pace = 0.0;
    unsigned jobs = 1;

    auto* run = app.add_subcommand("run", "run one mission");
    run->add_option("--scenario", scenario, "scenario JSON")->required();
    run->add_option("--seed", seed, "random seed")->required();
    run->add_option("--out", out, "output directory")->required();
    run->add_flag("--no-fine-align", no_fine, "aim from the prior map only");
    run->add_option("--waypoints", waypoints, "waypoint source")->check(CLI::IsMember({"hand", "extracted"}));
    run->add_flag("--dump-frames", dump, "write thermal frames as PGM");
    run->add_option("--pace", pace, "replay at this multiple of real time (0 = as fast as possible)")
        ->check(CLI::NonNegativeNumber);

    auto* bat = app.add_subcommand("batch", "run a range of seeds");
    bat->add_option("--scenario", scenario, "scenario JSON")->required();
    bat->add_option("--seeds", seeds, "inclusive range a..b")->required();
    bat->add_option("--out", out, "output directory")->required();
    bat->add_flag("--no-fine-align", no_fine, "aim from the prior map only");
    bat->add_option("--waypoints", waypoints, "waypoint source")->check(CLI::IsMember({"hand", "extracted"}));
    bat->add_option("--jobs", jobs, "parallel workers")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    cfg.scenario_path = scenario;
    cfg.out_dir = out;
    cfg.seed = seed;
    if (no_fine) cfg.fine_alignment = false;
    cfg.waypoints = waypoint_flag(waypoints);
    cfg.dump_frames = dump;
    cfg.pace = pace;

    try {
        if (*run) {
            const firebot::RunReport r = firebot::run(cfg);
            std::cout << "terminal " << r.terminal << ", " << r.duration << " s, extinguished "
                      << (r.success ? "yes" : "no") << ", report in " << out << "/report.json\n";
            return r.completed ? 0 : 1;
        }
        const auto [a, b] = firebot::parse_seed_range(seeds);
        const firebot::BatchSummary s = firebot::batch(cfg, a, b, jobs);
        std::cout << s.reports.size() << " runs, success rate " << s.success_rate << ", median duration "
                  << s.median_duration << " s, median liters through " << s.median_liters_through << "\n";
        return s.all_completed ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
