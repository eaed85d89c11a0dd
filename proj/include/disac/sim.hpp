#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "disac/filter.hpp"
#include "disac/geometry.hpp"
#include "disac/handover.hpp"
#include "disac/metrics.hpp"
#include "disac/motion.hpp"
#include "disac/rng.hpp"

namespace disac {

enum class SimMode { handover, independent };

std::string to_string(SimMode mode);
SimMode mode_from_string(const std::string& s);

struct TargetSpec {
    TargetState initial;
    int birth_step = 1;
    int death_step = 0;  // 0: full horizon
};

struct ScenarioConfig {
    std::vector<BsConfig> bs_list;
    std::vector<TargetSpec> targets;
    MotionConfig motion;
    FilterConfig filter;         // birth is rebuilt per BS from birth_weight
    double birth_weight = 0.05;
    int steps = 100;             // K
    double gamma = 0.5;
    int mc_runs = 100;
    uint64_t seed = 1;
    SimMode mode = SimMode::handover;
    int handover_cooldown = 10;
    bool noise_free_truth = false;
    TrajMetricConfig metric;
    int probe_step = 60;         // step at which matched birth steps are recorded

    void validate() const;
};

ScenarioConfig load_scenario(const std::string& path);
ScenarioConfig parse_scenario(const std::string& json_text);
std::string scenario_to_json(const ScenarioConfig& cfg);

struct GroundTruth {
    std::vector<TrajectoryState> targets;
    // visibility[bs][target][step-1]
    std::vector<std::vector<std::vector<char>>> visibility;
};

GroundTruth generate_ground_truth(const ScenarioConfig& cfg, RngStream& rng);

struct HandoverEvent {
    int step = 0;
    int source_bs = 0;
    int dest_bs = 0;
    uint64_t track_uid = 0;
    double weight = 0.0;
    Vec3 position = Vec3::Zero();  // newest-state position of the shipped track
};

struct RunResult {
    std::vector<std::vector<GospaResult>> step_gospa;  // [bs][step-1]
    // [bs][target][step-1]: position error of the traced estimate, NaN when
    // no estimate state exists at that step
    std::vector<std::vector<std::vector<double>>> target_error;
    std::vector<std::vector<int>> matched_birth_at_probe;  // [bs][target], -1 unmatched
    std::vector<HandoverEvent> handover_log;
    std::vector<std::vector<TrajectoryState>> final_estimates;  // [bs]
    int invariant_violations = 0;
};

/// One Monte-Carlo run. Measurement and truth streams depend only on
/// (seed, mc_index), never on the mode, so both modes consume identical
/// realizations.
RunResult run_single(const ScenarioConfig& cfg, int mc_index, bool check_invariants = false);

struct AggregateResult {
    // [bs][step-1]: mean over runs
    std::vector<std::vector<double>> rms;
    std::vector<std::vector<GospaResult>> gospa_per_step;  // per-step-normalized means
    // [bs][target][step-1]
    std::vector<std::vector<std::vector<double>>> rmse;
    std::vector<std::vector<std::vector<int>>> rmse_count;
    std::vector<std::vector<std::vector<int>>> matched_birth_at_probe;  // [run][bs][target]
    std::vector<std::vector<HandoverEvent>> handover_logs;  // per run
    std::vector<std::vector<TrajectoryState>> first_run_estimates;  // [bs]
    int invariant_violations = 0;
};

/// Runs all MC runs across a worker pool; the aggregate is independent of the
/// pool size.
AggregateResult run_monte_carlo(const ScenarioConfig& cfg, int workers,
                                bool check_invariants = false);

/// Writes manifest.json, per-BS metric CSVs, the handover log and the
/// first-run estimate dump into out_dir.
void write_outputs(const std::string& out_dir, const ScenarioConfig& cfg,
                   const AggregateResult& agg, const std::string& config_path,
                   double wall_seconds);

}  // namespace disac
