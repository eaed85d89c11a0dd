#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "disac/sim.hpp"

namespace fs = std::filesystem;

namespace {

int log_level() {
    const char* env = std::getenv("DISAC_LOG");
    if (!env) return 1;  // warn
    const std::string s(env);
    if (s == "error") return 0;
    if (s == "warn") return 1;
    if (s == "info") return 2;
    if (s == "debug") return 3;
    return 1;
}

void log_info(const std::string& msg) {
    if (log_level() >= 2) std::cerr << "[info] " << msg << "\n";
}

struct Csv {
    std::string header;
    std::vector<std::vector<std::string>> rows;
};

Csv read_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    Csv csv;
    std::string line;
    if (!std::getline(in, csv.header)) throw std::runtime_error("empty csv " + path.string());
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        csv.rows.push_back(std::move(cells));
    }
    return csv;
}

int cmd_run(const std::string& config_path, const std::string& mode, long long seed,
            int mc_runs, const std::string& out_dir, int workers) {
    disac::ScenarioConfig cfg;
    try {
        cfg = disac::load_scenario(config_path);
        if (!mode.empty()) cfg.mode = disac::mode_from_string(mode);
        if (seed >= 0) cfg.seed = static_cast<uint64_t>(seed);
        if (mc_runs > 0) cfg.mc_runs = mc_runs;
        cfg.validate();
    } catch (const std::exception& e) {
        std::cerr << "error: invalid configuration: " << e.what() << "\n";
        return 1;
    }

    try {
        if (workers <= 0) {
            workers = static_cast<int>(std::thread::hardware_concurrency());
            if (workers <= 0) workers = 1;
        }
        log_info("running " + std::to_string(cfg.mc_runs) + " MC runs, mode " +
                 disac::to_string(cfg.mode) + ", " + std::to_string(workers) + " workers");
        const auto t0 = std::chrono::steady_clock::now();
        const disac::AggregateResult agg = disac::run_monte_carlo(cfg, workers);
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        disac::write_outputs(out_dir, cfg, agg, config_path, wall);
        log_info("wrote outputs to " + out_dir);
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

int cmd_compare(const std::string& dir_a, const std::string& dir_b, const std::string& out_dir) {
    try {
        std::vector<std::string> names;
        if (!fs::is_directory(dir_a) || !fs::is_directory(dir_b)) {
            std::cerr << "error: both --a and --b must be directories\n";
            return 1;
        }
        for (const auto& entry : fs::directory_iterator(dir_a)) {
            const std::string name = entry.path().filename().string();
            if (name.ends_with(".csv") && name != "handover_log.csv") names.push_back(name);
        }
        std::sort(names.begin(), names.end());
        if (names.empty()) {
            std::cerr << "error: no CSV files in " << dir_a << "\n";
            return 1;
        }

        fs::create_directories(out_dir);
        std::ofstream summary(fs::path(out_dir) / "summary.txt");
        bool all_equal = true;

        for (const std::string& name : names) {
            if (!fs::exists(fs::path(dir_b) / name)) {
                std::cerr << "error: " << name << " missing in " << dir_b << "\n";
                return 1;
            }
            const Csv a = read_csv(fs::path(dir_a) / name);
            const Csv b = read_csv(fs::path(dir_b) / name);
            if (a.header != b.header || a.rows.size() != b.rows.size()) {
                std::cerr << "error: schema/step mismatch in " << name << "\n";
                return 1;
            }
            std::ofstream diff(fs::path(out_dir) / ("diff_" + name));
            diff << a.header << "\n";
            double max_abs = 0.0;
            for (size_t r = 0; r < a.rows.size(); ++r) {
                if (a.rows[r][0] != b.rows[r][0]) {
                    std::cerr << "error: step mismatch in " << name << "\n";
                    return 1;
                }
                diff << a.rows[r][0];
                for (size_t c = 1; c < a.rows[r].size(); ++c) {
                    const double va = std::strtod(a.rows[r][c].c_str(), nullptr);
                    const double vb = std::strtod(b.rows[r][c].c_str(), nullptr);
                    const double d = va - vb;
                    if (std::isfinite(d)) max_abs = std::max(max_abs, std::abs(d));
                    diff << ',' << d;
                }
                diff << "\n";
            }
            summary << name << ": max |a-b| = " << max_abs
                    << (max_abs == 0.0 ? " (equal)" : "") << "\n";
            if (max_abs != 0.0) all_equal = false;

            // comparative spotlight at step 40 for the RMS files
            if (name.find("_rms.csv") != std::string::npos && a.rows.size() >= 40) {
                const double va = std::strtod(a.rows[39][1].c_str(), nullptr);
                const double vb = std::strtod(b.rows[39][1].c_str(), nullptr);
                summary << name << " rms at step 40: a=" << va << " b=" << vb << " ("
                        << (va < vb ? "a<b" : (va > vb ? "a>b" : "equal")) << ")\n";
            }
        }
        summary << (all_equal ? "all files equal\n" : "differences found\n");
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-BS sensing simulator with trajectory-PMBM tracking and target handover"};
    app.require_subcommand(1);

    std::string config_path, mode, out_dir;
    long long seed = -1;
    int mc_runs = 0, workers = 0;

    auto* run = app.add_subcommand("run", "Run a scenario and emit metric CSVs");
    run->add_option("--config", config_path, "Scenario JSON file")->required();
    run->add_option("--mode", mode, "handover | independent");
    run->add_option("--seed", seed, "Override the scenario seed");
    run->add_option("--mc-runs", mc_runs, "Override the Monte-Carlo run count");
    run->add_option("--out", out_dir, "Output directory")->required();
    run->add_option("--workers", workers, "Worker pool size (default: hardware)");

    std::string dir_a, dir_b, cmp_out;
    auto* cmp = app.add_subcommand("compare", "Compare two output directories");
    cmp->add_option("--a", dir_a, "First output directory")->required();
    cmp->add_option("--b", dir_b, "Second output directory")->required();
    cmp->add_option("--out", cmp_out, "Directory for diff CSVs and summary")->required();

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) return cmd_run(config_path, mode, seed, mc_runs, out_dir, workers);
    return cmd_compare(dir_a, dir_b, cmp_out);
}
