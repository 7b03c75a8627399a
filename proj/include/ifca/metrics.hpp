#pragma once

#include <map>
#include <vector>

#include "ifca/data.hpp"
#include "ifca/model.hpp"

namespace ifca {

// Label alignment for the dist metric. match[j] is the index of the
// estimate assigned to ground-truth cluster j.
struct DistResult {
    double dist = 0.0;
    std::vector<int> match;
};

// dist = min over label permutations of (1/k) sum_j ||estimate_{pi(j)} - theta*_j||.
// Exhaustive for k <= 8, min-cost assignment (Hungarian) beyond.
DistResult dist_metric(const std::vector<ParamVector>& estimates, const GroundTruth& gt);

// Fraction of workers whose estimated label, relabeled through the same
// permutation dist_metric chose, equals the true cluster.
double cluster_accuracy(const std::map<int, int>& assignment,
                        const std::vector<WorkerDataset>& workers,
                        const std::vector<int>& match);

// Min-cost assignment on a square cost matrix; returns per-row column picks.
// O(n^3) Kuhn-Munkres with potentials.
std::vector<int> min_cost_assignment(const std::vector<std::vector<double>>& cost);

// Monte-Carlo estimate of P(argmin_j F_i(theta_j; fresh slice of n') != true j)
// for a worker whose data come from gt. Models must satisfy
// ||theta_j - theta*_j|| <= (1/2 - alpha) * Delta. The true cluster cycles
// deterministically over [k] across trials; each trial draws a fresh slice.
double estimate_misclassification(const GroundTruth& gt,
                                  const std::vector<ParamVector>& models,
                                  double alpha, int n_prime, int trials, Rng& rng,
                                  int threads = 1);

struct ContractionReport {
    bool satisfied = true;
    int first_violation = -1;   // round index t with e_{t+1} > c*e_t + eps
    double worst_excess = 0.0;
};

// Checks e_{t+1} <= c * e_t + eps along a per-round error trajectory.
ContractionReport contraction_check(const std::vector<double>& errors, double factor, double floor_eps);

} // namespace ifca
