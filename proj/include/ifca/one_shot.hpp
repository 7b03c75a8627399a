#pragma once

#include <map>
#include <vector>

#include "ifca/engine.hpp"

namespace ifca {

struct KMeansResult {
    std::vector<ParamVector> centers;
    std::map<int, int> assignment;     // point index -> cluster
    double inertia = 0.0;              // total within-cluster squared distance
    int iterations_used = 0;
};

enum class ErmSolver { ClosedForm, GradientDescent };

struct ErmConfig {
    ErmSolver solver = ErmSolver::ClosedForm;
    double gamma = 0.1;     // GD solver only
    int steps = 200;        // GD solver only
};

// Per-worker empirical risk minimizer. ClosedForm (SquaredLinear only)
// returns the minimum-norm least-squares solution; GD runs full-batch steps.
ParamVector local_erm(const WorkerDataset& worker, const LossModel& model,
                      const ErmConfig& cfg);

// Lloyd's algorithm with k-means++ seeding, best of `restarts` seedings.
// Stops when the max center movement drops below tol. Empty clusters are
// reseeded to the point farthest from its assigned center.
KMeansResult kmeans(const std::vector<ParamVector>& points, int k,
                    int max_iters, double tol, int restarts, Rng& rng);

struct OneShotResult {
    std::vector<ParamVector> models;
    std::map<int, int> assignment;     // worker -> cluster (from k-means)
    KMeansResult clustering;
};

struct OneShotConfig {
    ErmConfig erm;
    int kmeans_restarts = 10;
    int kmeans_max_iters = 100;
    double kmeans_tol = 1e-9;
    EngineConfig fl;    // per-cluster federated phase
};

// Algorithm: per-worker ERM, k-means over the ERM vectors at the center,
// then per-cluster FedAvg initialized at each cluster center.
OneShotResult one_shot_pipeline(const Federation& workers, const LossModel& model,
                                int k, const OneShotConfig& cfg, std::uint64_t seed);

} // namespace ifca
