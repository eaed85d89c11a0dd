#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "disac/filter.hpp"
#include "disac/geometry.hpp"
#include "disac/trajectory.hpp"

namespace disac {

/// Serialized trajectory-PPP component shipped from source_bs to dest_bs.
struct HandoverMessage {
    int version = 1;
    int source_bs = 0;
    int dest_bs = 0;
    int time_step = 0;               // the predicted step k+1 the payload refers to
    double weight = 0.0;             // w * r
    int birth_step = 1;
    int end_step = 1;
    Eigen::VectorXd window_mean;
    Eigen::MatrixXd window_cov;
    std::vector<Vec6> frozen_history;
    uint64_t track_uid = 0;
};

/// Lossless (hex-float) JSON wire format.
std::string encode_handover_message(const HandoverMessage& msg);
HandoverMessage decode_handover_message(const std::string& json_text);

/// Recently-sent suppression: at most one message per (source, dest, uid)
/// within any cooldown window.
struct HandoverRegistry {
    int cooldown = 10;  // steps
    std::map<std::tuple<int, int, uint64_t>, int> last_sent;

    bool recently_sent(int source, int dest, uint64_t uid, int step) const {
        const auto it = last_sent.find({source, dest, uid});
        return it != last_sent.end() && step - it->second < cooldown;
    }
    void record(int source, int dest, uint64_t uid, int step) {
        last_sent[{source, dest, uid}] = step;
    }
};

/// r * p_D * Phi where Phi is the unscented (2d+1 sigma points, kappa = 3-d)
/// approximation of the predicted position mass inside the destination FoV
/// ball. Throws std::runtime_error on a non-PD position marginal.
double entry_probability(const TrajectoryBernoulli& b, const BsConfig& dest);

/// Entry test plus suppression; records the send in the registry on success.
bool should_handover(const TrajectoryBernoulli& b, int source_bs, const BsConfig& dest,
                     HandoverRegistry& reg, double gamma, int step);

/// Message payload: weight = hypothesis weight * existence, density copied.
HandoverMessage to_handover_message(double hyp_weight, const TrajectoryBernoulli& b,
                                    int source_bs, int dest_bs, int step);

/// Append the message payload to the destination PPP. Returns false (message
/// dropped) when the step does not match the destination's predicted step.
bool merge_handover(TpmbmDensity& dest_density, const HandoverMessage& msg, int current_step);

/// One handover round across all BSs, run between predict and update.
/// Deterministic processing order: ascending (source index, hypothesis index,
/// Bernoulli index, dest index). Returns the ordered message log.
std::vector<HandoverMessage> run_handover_round(std::vector<TpmbmDensity>& densities,
                                                const std::vector<BsConfig>& bs_list,
                                                std::vector<HandoverRegistry>& registries,
                                                double gamma, int step);

}  // namespace disac
