#include "disac/sim.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

namespace disac {

namespace {

using nlohmann::json;

std::string fmt_g(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", x);
    return buf;
}

void append_doubles(std::string& out, const double* data, size_t n) {
    out.append(reinterpret_cast<const char*>(data), n * sizeof(double));
}

/// Byte-exact snapshot of the MBM part (hypotheses + Bernoulli pool) of a
/// density; used to verify that handover never touches it.
std::string mbm_fingerprint(const TpmbmDensity& d) {
    std::string s;
    for (const auto& h : d.hypotheses) {
        append_doubles(s, &h.weight, 1);
        for (int r : h.bernoulli_refs) s.append(reinterpret_cast<const char*>(&r), sizeof(int));
    }
    for (const auto& b : d.pool) {
        append_doubles(s, &b.existence, 1);
        append_doubles(s, &b.density.alive_prob, 1);
        s.append(reinterpret_cast<const char*>(&b.track_uid), sizeof(uint64_t));
        append_doubles(s, b.density.mean.data(), b.density.mean.size());
        append_doubles(s, b.density.cov.data(), b.density.cov.size());
        for (const Vec6& f : b.density.frozen_history) append_doubles(s, f.data(), 6);
    }
    return s;
}

}  // namespace

std::string to_string(SimMode mode) {
    return mode == SimMode::handover ? "handover" : "independent";
}

SimMode mode_from_string(const std::string& s) {
    if (s == "handover") return SimMode::handover;
    if (s == "independent") return SimMode::independent;
    throw std::invalid_argument("unknown mode: " + s);
}

void ScenarioConfig::validate() const {
    if (steps < 1) throw std::invalid_argument("steps must be >= 1");
    if (mc_runs < 1) throw std::invalid_argument("mc_runs must be >= 1");
    if (bs_list.empty()) throw std::invalid_argument("at least one BS required");
    for (const auto& bs : bs_list) bs.validate();
    for (size_t i = 0; i < bs_list.size(); ++i)
        for (size_t j = i + 1; j < bs_list.size(); ++j)
            if (bs_list[i].id == bs_list[j].id) throw std::invalid_argument("duplicate BS id");
    motion.validate();
    if (filter.max_hyps < 1) throw std::invalid_argument("max_hyps must be >= 1");
    if (filter.gate_threshold <= 0.0) throw std::invalid_argument("gate_threshold must be > 0");
    if (metric.cutoff <= 0.0 || metric.order < 1.0)
        throw std::invalid_argument("invalid metric config");
    for (const auto& t : targets) {
        if (t.birth_step < 1 || (t.death_step != 0 && t.death_step < t.birth_step))
            throw std::invalid_argument("invalid target birth/death steps");
    }
}

ScenarioConfig parse_scenario(const std::string& json_text) {
    const json j = json::parse(json_text);
    ScenarioConfig cfg;
    for (const auto& jb : j.at("bs_list")) {
        BsConfig bs;
        bs.id = jb.at("id").get<int>();
        for (int i = 0; i < 3; ++i) bs.position(i) = jb.at("position")[i].get<double>();
        if (jb.contains("orientation")) {
            const auto& o = jb.at("orientation");
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) bs.orientation(r, c) = o[3 * r + c].get<double>();
        }
        bs.fov_radius = jb.at("fov_radius").get<double>();
        bs.detection_prob_inside = jb.at("detection_prob_inside").get<double>();
        bs.clutter_rate = jb.at("clutter_rate").get<double>();
        const auto& r = jb.at("measurement_noise_cov");
        if (r.size() == 3) {
            bs.measurement_noise_cov.setZero();
            for (int i = 0; i < 3; ++i) bs.measurement_noise_cov(i, i) = r[i].get<double>();
        } else {
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b) bs.measurement_noise_cov(a, b) = r[3 * a + b].get<double>();
        }
        // Scenario files state the TOA noise as an equivalent range standard
        // deviation in meters (diag[m^2, rad^2, rad^2]); the filter works on
        // delays in seconds, so the first row/column is rescaled by 2/c.
        {
            const double k2c = 2.0 / kSpeedOfLight;
            bs.measurement_noise_cov(0, 0) *= k2c * k2c;
            for (int i = 1; i < 3; ++i) {
                bs.measurement_noise_cov(0, i) *= k2c;
                bs.measurement_noise_cov(i, 0) *= k2c;
            }
        }
        cfg.bs_list.push_back(bs);
    }
    for (const auto& jt : j.at("targets")) {
        TargetSpec t;
        for (int i = 0; i < 6; ++i) t.initial.x(i) = jt.at("initial_state")[i].get<double>();
        t.birth_step = jt.value("birth_step", 1);
        t.death_step = jt.value("death_step", 0);
        cfg.targets.push_back(t);
    }
    const auto& jm = j.at("motion");
    cfg.motion.dt = jm.at("dt").get<double>();
    for (int i = 0; i < 3; ++i) cfg.motion.accel_std(i) = jm.at("accel_std")[i].get<double>();
    cfg.motion.survival_prob = jm.at("survival_prob").get<double>();

    const auto& jf = j.at("filter");
    cfg.filter.gate_threshold = jf.at("gate_threshold").get<double>();
    cfg.filter.max_hyps = jf.at("max_hyps").get<int>();
    cfg.filter.ppp_thresh = jf.at("ppp_thresh").get<double>();
    cfg.filter.bern_thresh = jf.at("bern_thresh").get<double>();
    cfg.filter.window_len = jf.at("window_len").get<int>();
    cfg.filter.existence_extract_thresh = jf.at("existence_extract_thresh").get<double>();
    cfg.birth_weight = jf.value("birth_weight", 0.05);

    cfg.steps = j.at("steps").get<int>();
    cfg.gamma = j.at("gamma").get<double>();
    cfg.mc_runs = j.at("mc_runs").get<int>();
    cfg.seed = j.at("seed").get<uint64_t>();
    cfg.mode = mode_from_string(j.value("mode", "handover"));
    cfg.handover_cooldown = j.value("handover_cooldown", 10);
    cfg.noise_free_truth = j.value("noise_free_truth", false);
    if (j.contains("metric")) {
        cfg.metric.cutoff = j["metric"].value("cutoff", 10.0);
        cfg.metric.order = j["metric"].value("order", 2.0);
        cfg.metric.switch_cost = j["metric"].value("switch_cost", 2.0);
    }
    cfg.probe_step = j.value("probe_step", std::min(60, cfg.steps));
    cfg.validate();
    return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scenario file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

std::string scenario_to_json(const ScenarioConfig& cfg) {
    json j;
    for (const auto& bs : cfg.bs_list) {
        json jb;
        jb["id"] = bs.id;
        jb["position"] = {bs.position(0), bs.position(1), bs.position(2)};
        json o = json::array();
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) o.push_back(bs.orientation(r, c));
        jb["orientation"] = o;
        jb["fov_radius"] = bs.fov_radius;
        jb["detection_prob_inside"] = bs.detection_prob_inside;
        jb["clutter_rate"] = bs.clutter_rate;
        // written back in the scenario-file convention (TOA slot as range meters)
        Mat3 r_file = bs.measurement_noise_cov;
        const double kc2 = kSpeedOfLight / 2.0;
        r_file(0, 0) *= kc2 * kc2;
        for (int i = 1; i < 3; ++i) {
            r_file(0, i) *= kc2;
            r_file(i, 0) *= kc2;
        }
        json rr = json::array();
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) rr.push_back(r_file(a, b));
        jb["measurement_noise_cov"] = rr;
        j["bs_list"].push_back(jb);
    }
    for (const auto& t : cfg.targets) {
        json jt;
        json xs = json::array();
        for (int i = 0; i < 6; ++i) xs.push_back(t.initial.x(i));
        jt["initial_state"] = xs;
        jt["birth_step"] = t.birth_step;
        jt["death_step"] = t.death_step;
        j["targets"].push_back(jt);
    }
    j["motion"] = {{"dt", cfg.motion.dt},
                   {"accel_std", {cfg.motion.accel_std(0), cfg.motion.accel_std(1), cfg.motion.accel_std(2)}},
                   {"survival_prob", cfg.motion.survival_prob}};
    j["filter"] = {{"gate_threshold", cfg.filter.gate_threshold},
                   {"max_hyps", cfg.filter.max_hyps},
                   {"ppp_thresh", cfg.filter.ppp_thresh},
                   {"bern_thresh", cfg.filter.bern_thresh},
                   {"window_len", cfg.filter.window_len},
                   {"existence_extract_thresh", cfg.filter.existence_extract_thresh},
                   {"birth_weight", cfg.birth_weight}};
    j["steps"] = cfg.steps;
    j["gamma"] = cfg.gamma;
    j["mc_runs"] = cfg.mc_runs;
    j["seed"] = cfg.seed;
    j["mode"] = to_string(cfg.mode);
    j["handover_cooldown"] = cfg.handover_cooldown;
    j["noise_free_truth"] = cfg.noise_free_truth;
    j["metric"] = {{"cutoff", cfg.metric.cutoff},
                   {"order", cfg.metric.order},
                   {"switch_cost", cfg.metric.switch_cost}};
    j["probe_step"] = cfg.probe_step;
    return j.dump(2);
}

GroundTruth generate_ground_truth(const ScenarioConfig& cfg, RngStream& rng) {
    GroundTruth gt;
    const double dt = cfg.motion.dt;
    for (const auto& spec : cfg.targets) {
        TrajectoryState traj;
        traj.birth_step = spec.birth_step;
        traj.end_step = spec.death_step == 0 ? cfg.steps : spec.death_step;
        TargetState x = spec.initial;
        traj.states.push_back(x);
        for (int k = traj.birth_step + 1; k <= traj.end_step; ++k) {
            TargetState next = cv_predict_mean(x, cfg.motion);
            for (int axis = 0; axis < 3; ++axis) {
                const double a = rng.gaussian();
                if (!cfg.noise_free_truth) {
                    const double sa = cfg.motion.accel_std(axis) * a;
                    next.x(axis) += 0.5 * dt * dt * sa;
                    next.x(axis + 3) += dt * sa;
                }
            }
            traj.states.push_back(next);
            x = next;
        }
        gt.targets.push_back(std::move(traj));
    }

    gt.visibility.resize(cfg.bs_list.size());
    for (size_t b = 0; b < cfg.bs_list.size(); ++b) {
        gt.visibility[b].resize(gt.targets.size());
        for (size_t i = 0; i < gt.targets.size(); ++i) {
            auto& vis = gt.visibility[b][i];
            vis.assign(cfg.steps, 0);
            for (int k = 1; k <= cfg.steps; ++k) {
                if (!gt.targets[i].exists_at(k)) continue;
                const Vec3 pos = gt.targets[i].at_step(k).position();
                vis[k - 1] = (pos - cfg.bs_list[b].position).norm() <= cfg.bs_list[b].fov_radius;
            }
        }
    }
    return gt;
}

RunResult run_single(const ScenarioConfig& cfg, int mc_index, bool check_invariants) {
    const size_t n_bs = cfg.bs_list.size();
    const size_t n_targets = cfg.targets.size();

    RngStream truth_rng(derive_seed(cfg.seed, "truth", static_cast<uint64_t>(mc_index), 0));
    const GroundTruth truth = generate_ground_truth(cfg, truth_rng);

    std::vector<RngStream> meas_rng;
    meas_rng.reserve(n_bs);
    for (const auto& bs : cfg.bs_list)
        meas_rng.emplace_back(derive_seed(cfg.seed, "meas", static_cast<uint64_t>(bs.id),
                                          static_cast<uint64_t>(mc_index)));

    std::vector<TpmbmDensity> densities(n_bs);
    std::vector<FilterConfig> fcfg(n_bs, cfg.filter);
    for (size_t b = 0; b < n_bs; ++b) {
        densities[b] = TpmbmDensity::empty();
        fcfg[b].birth = {make_birth_component(cfg.bs_list[b], cfg.birth_weight)};
        fcfg[b].birth[0].density.window_len = cfg.filter.window_len;
    }
    std::vector<HandoverRegistry> registries(n_bs);
    for (auto& r : registries) r.cooldown = cfg.handover_cooldown;

    RunResult res;
    res.step_gospa.assign(n_bs, {});
    res.target_error.assign(n_bs, std::vector<std::vector<double>>(
                                      n_targets, std::vector<double>(cfg.steps,
                                                                     std::numeric_limits<double>::quiet_NaN())));
    res.matched_birth_at_probe.assign(n_bs, std::vector<int>(n_targets, -1));

    std::vector<std::vector<TrajectoryState>> probe_estimates(n_bs);

    for (int k = 1; k <= cfg.steps; ++k) {
        for (size_t b = 0; b < n_bs; ++b) predict(densities[b], cfg.motion, fcfg[b], k);

        if (cfg.mode == SimMode::handover) {
            std::vector<std::string> before;
            if (check_invariants)
                for (const auto& d : densities) before.push_back(mbm_fingerprint(d));

            const auto messages =
                run_handover_round(densities, cfg.bs_list, registries, cfg.gamma, k);
            for (const auto& m : messages)
                res.handover_log.push_back(HandoverEvent{m.time_step, m.source_bs, m.dest_bs,
                                                         m.track_uid, m.weight,
                                                         m.window_mean.tail<6>().head<3>()});

            if (check_invariants) {
                for (size_t b = 0; b < n_bs; ++b)
                    if (mbm_fingerprint(densities[b]) != before[b]) ++res.invariant_violations;
            }
        }

        std::vector<Vec3> positions;
        for (size_t b = 0; b < n_bs; ++b) {
            positions.clear();
            for (const auto& t : truth.targets)
                if (t.exists_at(k)) positions.push_back(t.at_step(k).position());
            const MeasurementSet z =
                sample_detections_and_clutter(cfg.bs_list[b], positions, meas_rng[b], k);
            update(densities[b], z, cfg.bs_list[b], fcfg[b]);

            if (check_invariants) {
                double sum = 0.0;
                for (const auto& h : densities[b].hypotheses) sum += h.weight;
                if (std::abs(sum - 1.0) > 1e-12) ++res.invariant_violations;
                for (const auto& bern : densities[b].pool)
                    if (bern.existence < -1e-12 || bern.existence > 1.0 + 1e-12)
                        ++res.invariant_violations;
            }

            auto estimates = extract_estimates(densities[b], fcfg[b]);
            res.step_gospa[b].push_back(trajectory_gospa(estimates, truth.targets, k, cfg.metric));
            if (k == cfg.probe_step) probe_estimates[b] = estimates;
            if (k == cfg.steps) res.final_estimates.push_back(std::move(estimates));
        }
    }

    for (size_t b = 0; b < n_bs; ++b) {
        if (cfg.probe_step >= 1 && cfg.probe_step <= cfg.steps) {
            const GospaTrace probe_trace =
                trajectory_gospa_trace(probe_estimates[b], truth.targets, cfg.probe_step, cfg.metric);
            const auto& final_map = probe_trace.maps.back();
            for (size_t i = 0; i < n_targets; ++i)
                if (final_map[i] >= 0)
                    res.matched_birth_at_probe[b][i] = probe_estimates[b][final_map[i]].birth_step;
        }

        const GospaTrace trace =
            trajectory_gospa_trace(res.final_estimates[b], truth.targets, cfg.steps, cfg.metric);
        const auto& final_map = trace.maps.back();
        for (size_t i = 0; i < n_targets; ++i) {
            if (final_map[i] < 0) continue;
            const TrajectoryState& est = res.final_estimates[b][final_map[i]];
            for (int k = 1; k <= cfg.steps; ++k) {
                if (!est.exists_at(k) || !truth.targets[i].exists_at(k)) continue;
                res.target_error[b][i][k - 1] =
                    (est.at_step(k).position() - truth.targets[i].at_step(k).position()).norm();
            }
        }
    }
    return res;
}

AggregateResult run_monte_carlo(const ScenarioConfig& cfg, int workers, bool check_invariants) {
    const size_t n_bs = cfg.bs_list.size();
    const size_t n_targets = cfg.targets.size();
    std::vector<RunResult> runs(cfg.mc_runs);

    if (workers < 1) workers = 1;
    std::atomic<int> next{0};
    auto worker_fn = [&] {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= cfg.mc_runs) break;
            runs[i] = run_single(cfg, i, check_invariants);
        }
    };
    if (workers == 1) {
        worker_fn();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker_fn);
        for (auto& t : pool) t.join();
    }

    AggregateResult agg;
    agg.rms.assign(n_bs, std::vector<double>(cfg.steps, 0.0));
    agg.gospa_per_step.assign(n_bs, std::vector<GospaResult>(cfg.steps));
    agg.rmse.assign(n_bs, std::vector<std::vector<double>>(n_targets,
                                                           std::vector<double>(cfg.steps, 0.0)));
    agg.rmse_count.assign(n_bs,
                          std::vector<std::vector<int>>(n_targets, std::vector<int>(cfg.steps, 0)));

    for (int r = 0; r < cfg.mc_runs; ++r) {
        const RunResult& run = runs[r];
        for (size_t b = 0; b < n_bs; ++b) {
            for (int k = 1; k <= cfg.steps; ++k) {
                const GospaResult& g = run.step_gospa[b][k - 1];
                agg.rms[b][k - 1] += std::sqrt(g.total / k);
                auto& acc = agg.gospa_per_step[b][k - 1];
                acc.total += g.total / k;
                acc.localization += g.localization / k;
                acc.missed += g.missed / k;
                acc.false_cost += g.false_cost / k;
                acc.switch_total += g.switch_total / k;
                for (size_t i = 0; i < n_targets; ++i) {
                    const double e = run.target_error[b][i][k - 1];
                    if (!std::isnan(e)) {
                        agg.rmse[b][i][k - 1] += e * e;
                        agg.rmse_count[b][i][k - 1] += 1;
                    }
                }
            }
        }
        agg.matched_birth_at_probe.push_back(run.matched_birth_at_probe);
        agg.handover_logs.push_back(run.handover_log);
        agg.invariant_violations += run.invariant_violations;
    }

    for (size_t b = 0; b < n_bs; ++b) {
        for (int k = 0; k < cfg.steps; ++k) {
            agg.rms[b][k] /= cfg.mc_runs;
            auto& acc = agg.gospa_per_step[b][k];
            acc.total /= cfg.mc_runs;
            acc.localization /= cfg.mc_runs;
            acc.missed /= cfg.mc_runs;
            acc.false_cost /= cfg.mc_runs;
            acc.switch_total /= cfg.mc_runs;
            for (size_t i = 0; i < n_targets; ++i) {
                const int n = agg.rmse_count[b][i][k];
                agg.rmse[b][i][k] = n > 0 ? std::sqrt(agg.rmse[b][i][k] / n)
                                          : std::numeric_limits<double>::infinity();
            }
        }
    }
    agg.first_run_estimates = runs[0].final_estimates;
    return agg;
}

void write_outputs(const std::string& out_dir, const ScenarioConfig& cfg,
                   const AggregateResult& agg, const std::string& config_path,
                   double wall_seconds) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    {
        json manifest;
        manifest["config_path"] = config_path;
        manifest["seed"] = cfg.seed;
        manifest["mode"] = to_string(cfg.mode);
        manifest["mc_runs"] = cfg.mc_runs;
        manifest["output_dir"] = out_dir;
#ifdef DISAC_BUILD_ID
        manifest["build_id"] = DISAC_BUILD_ID;
#else
        manifest["build_id"] = "dev";
#endif
        manifest["wall_seconds"] = wall_seconds;
        json files = json::array();
        for (const auto& bs : cfg.bs_list) {
            files.push_back("bs" + std::to_string(bs.id) + "_rms.csv");
            for (size_t i = 0; i < cfg.targets.size(); ++i)
                files.push_back("bs" + std::to_string(bs.id) + "_rmse_target" +
                                std::to_string(i + 1) + ".csv");
        }
        files.push_back("handover_log.csv");
        files.push_back("estimates_run0.json");
        manifest["files"] = files;
        std::ofstream out(fs::path(out_dir) / "manifest.json");
        out << manifest.dump(2) << "\n";
    }

    for (size_t b = 0; b < cfg.bs_list.size(); ++b) {
        const int id = cfg.bs_list[b].id;
        {
            std::ofstream out(fs::path(out_dir) / ("bs" + std::to_string(id) + "_rms.csv"));
            out << "step,rms_total,loc,missed,false,switch\n";
            for (int k = 1; k <= cfg.steps; ++k) {
                const auto& g = agg.gospa_per_step[b][k - 1];
                out << k << ',' << fmt_g(agg.rms[b][k - 1]) << ',' << fmt_g(g.localization) << ','
                    << fmt_g(g.missed) << ',' << fmt_g(g.false_cost) << ','
                    << fmt_g(g.switch_total) << "\n";
            }
        }
        for (size_t i = 0; i < cfg.targets.size(); ++i) {
            std::ofstream out(fs::path(out_dir) / ("bs" + std::to_string(id) + "_rmse_target" +
                                                   std::to_string(i + 1) + ".csv"));
            out << "step,rmse_target" << (i + 1) << ",count_defined\n";
            for (int k = 1; k <= cfg.steps; ++k)
                out << k << ',' << fmt_g(agg.rmse[b][i][k - 1]) << ','
                    << agg.rmse_count[b][i][k - 1] << "\n";
        }
    }

    {
        std::ofstream out(fs::path(out_dir) / "handover_log.csv");
        out << "run,step,source_bs,dest_bs,track_uid,weight,pos_x,pos_y,pos_z\n";
        for (size_t r = 0; r < agg.handover_logs.size(); ++r)
            for (const auto& e : agg.handover_logs[r])
                out << r << ',' << e.step << ',' << e.source_bs << ',' << e.dest_bs << ','
                    << e.track_uid << ',' << fmt_g(e.weight) << ',' << fmt_g(e.position.x())
                    << ',' << fmt_g(e.position.y()) << ',' << fmt_g(e.position.z()) << "\n";
    }

    {
        json est = json::array();
        for (size_t b = 0; b < cfg.bs_list.size(); ++b) {
            json jb;
            jb["bs_id"] = cfg.bs_list[b].id;
            json trajs = json::array();
            for (const auto& t : agg.first_run_estimates[b]) {
                json jt;
                jt["birth_step"] = t.birth_step;
                jt["end_step"] = t.end_step;
                json states = json::array();
                for (const auto& s : t.states) {
                    json xs = json::array();
                    for (int i = 0; i < 6; ++i) xs.push_back(s.x(i));
                    states.push_back(xs);
                }
                jt["states"] = states;
                trajs.push_back(jt);
            }
            jb["trajectories"] = trajs;
            est.push_back(jb);
        }
        std::ofstream out(fs::path(out_dir) / "estimates_run0.json");
        out << est.dump() << "\n";
    }
}

}  // namespace disac
