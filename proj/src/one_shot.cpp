#include "ifca/one_shot.hpp"

#include <Eigen/QR>
#include <cassert>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ifca/parallel.hpp"

namespace ifca {

ParamVector local_erm(const WorkerDataset& worker, const LossModel& model,
                      const ErmConfig& cfg) {
    if (cfg.solver == ErmSolver::ClosedForm) {
        if (model.kind != LossKind::SquaredLinear)
            throw std::invalid_argument("local_erm: ClosedForm requires the squared loss");
        // minimum-norm least-squares solution, rank-deficiency safe
        return worker.X.completeOrthogonalDecomposition().solve(worker.y);
    }
    Rng rng(0);   // full-batch GD consumes no randomness
    return local_update(model, ParamVector::Zero(worker.dim()), worker.all(),
                        cfg.gamma, cfg.steps, 0, rng);
}

namespace {

double squared_distance(const ParamVector& a, const ParamVector& b) {
    return (a - b).squaredNorm();
}

// k-means++: first center uniform, then proportional to squared distance.
std::vector<ParamVector> seed_centers(const std::vector<ParamVector>& points, int k, Rng& rng) {
    const int m = static_cast<int>(points.size());
    std::vector<ParamVector> centers;
    centers.reserve(k);
    centers.push_back(points[rng.uniform_int(m)]);
    std::vector<double> d2(m);
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (int i = 0; i < m; ++i) {
            double best = squared_distance(points[i], centers[0]);
            for (std::size_t j = 1; j < centers.size(); ++j)
                best = std::min(best, squared_distance(points[i], centers[j]));
            d2[i] = best;
            total += best;
        }
        if (total <= 0.0) {
            // all points coincide with existing centers
            centers.push_back(points[rng.uniform_int(m)]);
            continue;
        }
        double target = rng.uniform() * total;
        int pick = m - 1;
        for (int i = 0; i < m; ++i) {
            target -= d2[i];
            if (target <= 0.0) { pick = i; break; }
        }
        centers.push_back(points[pick]);
    }
    return centers;
}

struct LloydOutcome {
    std::vector<ParamVector> centers;
    std::vector<int> assignment;
    double inertia = 0.0;
    int iterations = 0;
};

LloydOutcome lloyd(const std::vector<ParamVector>& points,
                   std::vector<ParamVector> centers, int max_iters, double tol) {
    const int m = static_cast<int>(points.size());
    const int k = static_cast<int>(centers.size());
    LloydOutcome out;
    out.assignment.assign(m, 0);
    double prev_inertia = std::numeric_limits<double>::infinity();

    for (int iter = 0; iter < max_iters; ++iter) {
        // assignment step
        double inertia = 0.0;
        for (int i = 0; i < m; ++i) {
            int best = 0;
            double best_d = squared_distance(points[i], centers[0]);
            for (int j = 1; j < k; ++j) {
                const double dj = squared_distance(points[i], centers[j]);
                if (dj < best_d) { best_d = dj; best = j; }
            }
            out.assignment[i] = best;
            inertia += best_d;
        }
        assert(inertia <= prev_inertia + 1e-9 * (1.0 + prev_inertia) && "Lloyd inertia increased");
        prev_inertia = inertia;
        out.inertia = inertia;
        out.iterations = iter + 1;

        // update step
        std::vector<ParamVector> next(k, ParamVector::Zero(points[0].size()));
        std::vector<int> counts(k, 0);
        for (int i = 0; i < m; ++i) {
            next[out.assignment[i]] += points[i];
            counts[out.assignment[i]]++;
        }
        for (int j = 0; j < k; ++j) {
            if (counts[j] > 0) {
                next[j] /= static_cast<double>(counts[j]);
            } else {
                // reseed an empty cluster to the point farthest from its center
                int far = 0;
                double far_d = -1.0;
                for (int i = 0; i < m; ++i) {
                    const double di = squared_distance(points[i], centers[out.assignment[i]]);
                    if (di > far_d) { far_d = di; far = i; }
                }
                next[j] = points[far];
            }
        }

        double movement = 0.0;
        for (int j = 0; j < k; ++j)
            movement = std::max(movement, (next[j] - centers[j]).norm());
        centers = std::move(next);
        if (movement < tol) break;
    }

    // final assignment against the converged centers
    double inertia = 0.0;
    for (int i = 0; i < m; ++i) {
        int best = 0;
        double best_d = squared_distance(points[i], centers[0]);
        for (int j = 1; j < k; ++j) {
            const double dj = squared_distance(points[i], centers[j]);
            if (dj < best_d) { best_d = dj; best = j; }
        }
        out.assignment[i] = best;
        inertia += best_d;
    }
    out.inertia = inertia;
    out.centers = std::move(centers);
    return out;
}

} // namespace

KMeansResult kmeans(const std::vector<ParamVector>& points, int k,
                    int max_iters, double tol, int restarts, Rng& rng) {
    const int m = static_cast<int>(points.size());
    if (m < k) throw std::invalid_argument("kmeans: need at least k points");
    if (k < 1 || max_iters < 1 || restarts < 1)
        throw std::invalid_argument("kmeans: k, max_iters, restarts must be >= 1");

    LloydOutcome best;
    best.inertia = std::numeric_limits<double>::infinity();
    for (int r = 0; r < restarts; ++r) {
        LloydOutcome run = lloyd(points, seed_centers(points, k, rng), max_iters, tol);
        if (run.inertia < best.inertia) best = std::move(run);
    }

    KMeansResult result;
    result.centers = std::move(best.centers);
    result.inertia = best.inertia;
    result.iterations_used = best.iterations;
    for (int i = 0; i < m; ++i) result.assignment.emplace(i, best.assignment[i]);
    return result;
}

OneShotResult one_shot_pipeline(const Federation& workers, const LossModel& model,
                                int k, const OneShotConfig& cfg, std::uint64_t seed) {
    const int m = static_cast<int>(workers.size());
    if (m < k) throw std::invalid_argument("one_shot_pipeline: need m >= k");

    // step 1: per-worker ERM
    std::vector<ParamVector> erms(m);
    parallel_for(m, cfg.fl.threads, [&](int i) {
        erms[i] = local_erm(workers[i], model, cfg.erm);
    });

    // step 2: cluster the ERM vectors at the center
    Rng krng(derive_seed(seed, 0));
    KMeansResult clustering = kmeans(erms, k, cfg.kmeans_max_iters, cfg.kmeans_tol,
                                     cfg.kmeans_restarts, krng);

    // step 3: federated training within each estimated cluster, initialized
    // at the cluster center
    OneShotResult out;
    out.assignment = clustering.assignment;
    out.models.resize(k);
    for (int j = 0; j < k; ++j) {
        std::vector<int> members;
        for (const auto& [wid, cj] : clustering.assignment)
            if (cj == j) members.push_back(wid);
        if (members.empty()) {
            out.models[j] = clustering.centers[j];
            continue;
        }
        out.models[j] = run_global_baseline(workers, members, clustering.centers[j],
                                            model, cfg.fl,
                                            derive_seed(seed, 1 + static_cast<std::uint64_t>(j)));
    }
    out.clustering = std::move(clustering);
    return out;
}

} // namespace ifca
