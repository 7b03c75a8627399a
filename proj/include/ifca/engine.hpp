#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "ifca/data.hpp"
#include "ifca/model.hpp"

namespace ifca {

using Federation = std::vector<WorkerDataset>;

enum class UpdateRule { GradAvg, ModelAvg };

struct ServerState {
    int round = 0;
    std::vector<ParamVector> models;                 // theta_j^(t), j in [k]
    std::optional<std::vector<bool>> shared_mask;    // true = coordinate shared across clusters

    int k() const { return static_cast<int>(models.size()); }
};

struct RoundReport {
    int round = 0;
    std::map<int, int> assignment;      // worker_id -> estimated cluster, keys = M_t
    std::vector<int> participants;      // M_t, ascending
    std::vector<int> cluster_sizes;     // |S_j^(t)|
    std::vector<double> update_norms;   // ||theta_j^(t+1) - theta_j^(t)||
    std::vector<bool> cluster_empty;
};

struct IdentityEstimate {
    int cluster = 0;            // jhat, ties broken toward the lowest index
    Eigen::VectorXd losses;     // empirical loss per broadcast model

    Eigen::VectorXd one_hot() const {
        Eigen::VectorXd s = Eigen::VectorXd::Zero(losses.size());
        s[cluster] = 1.0;
        return s;
    }
};

IdentityEstimate estimate_identity(const LossModel& model,
                                   const std::vector<ParamVector>& models,
                                   const DataView& slice);

// ceil(fraction * |population|) distinct workers, uniformly without
// replacement, ascending. fraction == 1 returns the whole population and
// consumes no randomness.
std::vector<int> sample_participation(const std::vector<int>& population,
                                      double fraction, Rng& rng);

struct EngineConfig {
    UpdateRule option = UpdateRule::GradAvg;
    double gamma = 0.1;
    double decay = 1.0;       // per-round multiplicative step-size decay
    int tau = 1;              // local steps (ModelAvg)
    int batch = 0;            // 0 = full batch
    double participation = 1.0;
    bool resample = false;    // use the 2T-slice partition
    int rounds = 300;         // T
    int threads = 1;          // per-round worker parallelism
    std::optional<std::vector<bool>> shared_mask;   // weight-sharing coordinates
};

// One IFCA round over the given worker population. The round index and the
// effective step size are taken from state.round and cfg.gamma (run_ifca
// applies decay before calling). Participation is sampled from rng; all
// per-worker randomness is derived from one value drawn here, so the result
// is independent of worker execution order.
std::pair<ServerState, RoundReport> ifca_round(const ServerState& state,
                                               const Federation& workers,
                                               const std::vector<int>& population,
                                               const LossModel& model,
                                               const EngineConfig& cfg, Rng& rng);

struct RunTrace {
    std::vector<ParamVector> final_models;
    std::vector<RoundReport> reports;
    std::vector<double> dist;       // per round, when ground truth given
    std::vector<double> accuracy;   // per round, when ground truth given
    int stabilized_round = -1;      // first round from which assignments never change
};

RunTrace run_ifca(const EngineConfig& cfg, const Federation& workers,
                  const std::vector<int>& population,
                  std::vector<ParamVector> init, const LossModel& model,
                  std::uint64_t seed, const GroundTruth* gt = nullptr);

RunTrace run_ifca(const EngineConfig& cfg, const Federation& workers,
                  std::vector<ParamVector> init, const LossModel& model,
                  std::uint64_t seed, const GroundTruth* gt = nullptr);

// Single-model FedAvg over the population: IFCA with k = 1.
ParamVector run_global_baseline(const Federation& workers,
                                const std::vector<int>& population,
                                ParamVector init, const LossModel& model,
                                const EngineConfig& cfg, std::uint64_t seed);

// Independent gradient descent per worker, no communication.
std::vector<ParamVector> run_local_baseline(const Federation& workers,
                                            const ParamVector& init,
                                            const LossModel& model,
                                            double gamma, int steps, int batch,
                                            std::uint64_t seed, int threads = 1);

std::vector<int> all_workers(const Federation& workers);

} // namespace ifca
