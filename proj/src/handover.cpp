#include "disac/handover.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

namespace disac {

namespace {

using nlohmann::json;

std::string hex_double(double x) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%a", x);
    return buf;
}

double parse_hex_double(const std::string& s) { return std::strtod(s.c_str(), nullptr); }

json encode_vector(const Eigen::VectorXd& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(hex_double(v(i)));
    return arr;
}

Eigen::VectorXd decode_vector(const json& arr) {
    Eigen::VectorXd v(arr.size());
    for (size_t i = 0; i < arr.size(); ++i) v(static_cast<Eigen::Index>(i)) = parse_hex_double(arr[i].get<std::string>());
    return v;
}

}  // namespace

std::string encode_handover_message(const HandoverMessage& msg) {
    json j;
    j["version"] = msg.version;
    j["source_bs"] = msg.source_bs;
    j["dest_bs"] = msg.dest_bs;
    j["time_step"] = msg.time_step;
    j["weight"] = hex_double(msg.weight);
    j["birth_step"] = msg.birth_step;
    j["end_step"] = msg.end_step;
    j["track_uid"] = msg.track_uid;
    j["window_mean"] = encode_vector(msg.window_mean);
    j["window_cov_rows"] = msg.window_cov.rows();
    // row-major flattening
    Eigen::VectorXd flat(msg.window_cov.size());
    Eigen::Index k = 0;
    for (Eigen::Index r = 0; r < msg.window_cov.rows(); ++r)
        for (Eigen::Index c = 0; c < msg.window_cov.cols(); ++c) flat(k++) = msg.window_cov(r, c);
    j["window_cov"] = encode_vector(flat);
    json hist = json::array();
    for (const Vec6& x : msg.frozen_history) hist.push_back(encode_vector(x));
    j["frozen_history"] = hist;
    return j.dump();
}

HandoverMessage decode_handover_message(const std::string& json_text) {
    const json j = json::parse(json_text);
    HandoverMessage msg;
    msg.version = j.at("version").get<int>();
    if (msg.version != 1) throw std::runtime_error("unsupported handover message version");
    msg.source_bs = j.at("source_bs").get<int>();
    msg.dest_bs = j.at("dest_bs").get<int>();
    msg.time_step = j.at("time_step").get<int>();
    msg.weight = parse_hex_double(j.at("weight").get<std::string>());
    msg.birth_step = j.at("birth_step").get<int>();
    msg.end_step = j.at("end_step").get<int>();
    msg.track_uid = j.at("track_uid").get<uint64_t>();
    msg.window_mean = decode_vector(j.at("window_mean"));
    const Eigen::Index rows = j.at("window_cov_rows").get<Eigen::Index>();
    const Eigen::VectorXd flat = decode_vector(j.at("window_cov"));
    msg.window_cov.resize(rows, rows);
    Eigen::Index k = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < rows; ++c) msg.window_cov(r, c) = flat(k++);
    for (const auto& h : j.at("frozen_history")) msg.frozen_history.push_back(Vec6(decode_vector(h)));
    return msg;
}

double entry_probability(const TrajectoryBernoulli& b, const BsConfig& dest) {
    const Vec3 mean = b.density.newest_mean().head<3>();
    const Mat3 cov = b.density.newest_cov().topLeftCorner<3, 3>();
    Eigen::LLT<Mat3> llt(cov);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("entry_probability: position marginal not positive definite");
    const Mat3 chol = llt.matrixL();

    // 2d+1 unscented points, kappa = 3 - d = 0: center weight 0, others 1/(2d)
    const int d = 3;
    const double kappa = 3.0 - d;
    const double spread = std::sqrt(d + kappa);
    const double w_center = kappa / (d + kappa);
    const double w_side = 1.0 / (2.0 * (d + kappa));

    auto inside = [&](const Vec3& p) {
        return (p - dest.position).norm() <= dest.fov_radius ? 1.0 : 0.0;
    };

    double mass = w_center * inside(mean);
    for (int i = 0; i < d; ++i) {
        const Vec3 offset = spread * chol.col(i);
        mass += w_side * inside(mean + offset);
        mass += w_side * inside(mean - offset);
    }
    return b.existence * dest.detection_prob_inside * mass;
}

bool should_handover(const TrajectoryBernoulli& b, int source_bs, const BsConfig& dest,
                     HandoverRegistry& reg, double gamma, int step) {
    if (entry_probability(b, dest) < gamma) return false;
    if (reg.recently_sent(source_bs, dest.id, b.track_uid, step)) return false;
    reg.record(source_bs, dest.id, b.track_uid, step);
    return true;
}

HandoverMessage to_handover_message(double hyp_weight, const TrajectoryBernoulli& b,
                                    int source_bs, int dest_bs, int step) {
    HandoverMessage msg;
    msg.source_bs = source_bs;
    msg.dest_bs = dest_bs;
    msg.time_step = step;
    msg.weight = hyp_weight * b.existence;
    msg.birth_step = b.density.birth_step;
    msg.end_step = b.density.end_step;
    msg.window_mean = b.density.mean;
    msg.window_cov = b.density.cov;
    msg.frozen_history = b.density.frozen_history;
    msg.track_uid = b.track_uid;
    return msg;
}

bool merge_handover(TpmbmDensity& dest_density, const HandoverMessage& msg, int current_step) {
    if (msg.time_step != current_step) return false;  // stale, dropped
    PppComponent c;
    c.weight = msg.weight;
    c.density.birth_step = msg.birth_step;
    c.density.end_step = msg.end_step;
    c.density.mean = msg.window_mean;
    c.density.cov = msg.window_cov;
    c.density.frozen_history = msg.frozen_history;
    c.density.window_len = static_cast<int>(msg.window_mean.size()) / 6;
    c.density.alive_prob = 1.0;
    dest_density.ppp.push_back(std::move(c));
    return true;
}

std::vector<HandoverMessage> run_handover_round(std::vector<TpmbmDensity>& densities,
                                                const std::vector<BsConfig>& bs_list,
                                                std::vector<HandoverRegistry>& registries,
                                                double gamma, int step) {
    std::vector<HandoverMessage> log;
    const size_t n_bs = bs_list.size();
    for (size_t m = 0; m < n_bs; ++m) {
        const TpmbmDensity& src = densities[m];
        // the entry test depends only on the pool Bernoulli and the destination,
        // so memoize it across the hypotheses sharing that Bernoulli
        std::vector<int8_t> entry_pass(src.pool.size() * n_bs, -1);
        for (const GlobalHypothesis& hyp : src.hypotheses) {
            for (int ref : hyp.bernoulli_refs) {
                const TrajectoryBernoulli& bern = src.pool[ref];
                for (size_t mp = 0; mp < n_bs; ++mp) {
                    if (mp == m) continue;
                    int8_t& pass = entry_pass[static_cast<size_t>(ref) * n_bs + mp];
                    if (pass < 0) pass = entry_probability(bern, bs_list[mp]) >= gamma ? 1 : 0;
                    if (!pass) continue;
                    if (registries[m].recently_sent(bs_list[m].id, bs_list[mp].id, bern.track_uid,
                                                    step))
                        continue;
                    registries[m].record(bs_list[m].id, bs_list[mp].id, bern.track_uid, step);
                    log.push_back(
                        to_handover_message(hyp.weight, bern, bs_list[m].id, bs_list[mp].id, step));
                }
            }
        }
    }
    // wire round trip, then apply every merge in the deterministic log order
    for (const HandoverMessage& msg : log) {
        const HandoverMessage decoded = decode_handover_message(encode_handover_message(msg));
        for (size_t mp = 0; mp < n_bs; ++mp) {
            if (bs_list[mp].id == decoded.dest_bs) merge_handover(densities[mp], decoded, step);
        }
    }
    return log;
}

}  // namespace disac
