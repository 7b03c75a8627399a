#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ifca {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

// Central finite differences against the analytic gradient, `instances`
// random (theta, Z) pairs per loss family, per-coordinate relative
// tolerance `tol`.
CheckResult check_gradients(int instances = 100, double tol = 1e-5,
                            std::uint64_t seed = 12345);

// Noiseless linear model, warm initialization, exact gradients, step size
// gamma = 1/(4p): every per-round error trajectory must satisfy
// e_{t+1} <= factor * e_t + floor_eps for all of `rounds` rounds, on each of
// `seeds` independent draws.
CheckResult check_contraction(int seeds = 20, int rounds = 50, double factor = 0.9,
                              double floor_eps = 1e-8, std::uint64_t seed = 777);

// Monte-Carlo misclassification estimates over a grid of slice sizes must
// decrease strictly and show a negative log-linear slope in n'.
CheckResult check_misclassification_decay(std::vector<int> n_primes = {5, 10, 20, 40, 80},
                                          int trials = 100000,
                                          std::uint64_t seed = 4242, int threads = 1);

// kmeans inertia equals the exhaustive-assignment optimum for random
// configurations of at most 8 points, k = 2.
CheckResult check_kmeans_oracle(int seeds = 50, std::uint64_t seed = 99);

} // namespace ifca
