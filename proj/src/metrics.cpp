#include "ifca/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "ifca/parallel.hpp"

namespace ifca {

std::vector<int> min_cost_assignment(const std::vector<std::vector<double>>& cost) {
    const int n = static_cast<int>(cost.size());
    // potentials over a 1-indexed grid with a virtual row/column 0
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, std::numeric_limits<double>::infinity());
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            int i0 = p[j0], j1 = 0;
            double delta = std::numeric_limits<double>::infinity();
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) { minv[j] = cur; way[j] = j0; }
                if (minv[j] < delta) { delta = minv[j]; j1 = j; }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) { u[p[j]] += delta; v[j] -= delta; }
                else minv[j] -= delta;
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> row_to_col(n, -1);
    for (int j = 1; j <= n; ++j)
        if (p[j]) row_to_col[p[j] - 1] = j - 1;
    return row_to_col;
}

DistResult dist_metric(const std::vector<ParamVector>& estimates, const GroundTruth& gt) {
    const int k = gt.k;
    if (static_cast<int>(estimates.size()) != k)
        throw std::invalid_argument("dist_metric: estimate count != k");

    std::vector<std::vector<double>> cost(k, std::vector<double>(k));
    for (int j = 0; j < k; ++j)
        for (int e = 0; e < k; ++e)
            cost[j][e] = (estimates[e] - gt.params[j]).norm();

    DistResult result;
    if (k <= 8) {
        std::vector<int> perm(k);
        std::iota(perm.begin(), perm.end(), 0);
        double best = std::numeric_limits<double>::infinity();
        std::vector<int> best_perm = perm;
        do {
            double total = 0.0;
            for (int j = 0; j < k; ++j) total += cost[j][perm[j]];
            if (total < best) { best = total; best_perm = perm; }
        } while (std::next_permutation(perm.begin(), perm.end()));
        result.dist = best / k;
        result.match = best_perm;
    } else {
        result.match = min_cost_assignment(cost);
        double total = 0.0;
        for (int j = 0; j < k; ++j) total += cost[j][result.match[j]];
        result.dist = total / k;
    }
    return result;
}

double cluster_accuracy(const std::map<int, int>& assignment,
                        const std::vector<WorkerDataset>& workers,
                        const std::vector<int>& match) {
    if (assignment.empty()) return 0.0;
    const int k = static_cast<int>(match.size());
    std::vector<int> estimate_to_truth(k, -1);
    for (int j = 0; j < k; ++j) {
        if (match[j] < 0 || match[j] >= k)
            throw std::invalid_argument("cluster_accuracy: invalid permutation");
        estimate_to_truth[match[j]] = j;
    }
    int correct = 0;
    for (const auto& [worker_id, jhat] : assignment) {
        if (estimate_to_truth[jhat] == workers[worker_id].true_cluster) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(assignment.size());
}

double estimate_misclassification(const GroundTruth& gt,
                                  const std::vector<ParamVector>& models,
                                  double alpha, int n_prime, int trials, Rng& rng,
                                  int threads) {
    if (static_cast<int>(models.size()) != gt.k)
        throw std::invalid_argument("estimate_misclassification: model count != k");
    if (n_prime < 1 || trials < 1)
        throw std::invalid_argument("estimate_misclassification: n_prime and trials must be >= 1");
    const double delta = gt.separation();
    for (int j = 0; j < gt.k; ++j) {
        if ((models[j] - gt.params[j]).norm() > (0.5 - alpha) * delta + 1e-12)
            throw std::invalid_argument(
                "estimate_misclassification: model " + std::to_string(j) +
                " violates closeness ||theta_j - theta*_j|| <= (1/2 - alpha) Delta");
    }

    const std::uint64_t base = rng.next_u64();
    const LossModel loss = LossModel::squared_linear();
    const int k = gt.k;
    const int d = gt.d;

    const int blocks = threads > 1 ? std::min(trials, 8 * threads) : 1;
    std::vector<long> errors(blocks, 0);
    parallel_for(blocks, threads, [&](int b) {
        const int lo = static_cast<int>(static_cast<long>(trials) * b / blocks);
        const int hi = static_cast<int>(static_cast<long>(trials) * (b + 1) / blocks);
        Eigen::MatrixXd X(n_prime, d);
        Eigen::VectorXd y(n_prime);
        long local = 0;
        for (int t = lo; t < hi; ++t) {
            Rng trng(derive_seed(base, static_cast<std::uint64_t>(t)));
            const int true_j = t % k;
            const ParamVector& theta = gt.params[true_j];
            for (int r = 0; r < n_prime; ++r) {
                for (int c = 0; c < d; ++c) X(r, c) = trng.normal();
                y[r] = X.row(r).dot(theta) + gt.sigma * trng.normal();
            }
            const DataView view{X, y};
            int arg = 0;
            double best = empirical_loss(loss, models[0], view);
            for (int j = 1; j < k; ++j) {
                const double lj = empirical_loss(loss, models[j], view);
                if (lj < best) { best = lj; arg = j; }
            }
            if (arg != true_j) ++local;
        }
        errors[b] = local;
    });
    const long total = std::accumulate(errors.begin(), errors.end(), 0L);
    return static_cast<double>(total) / static_cast<double>(trials);
}

ContractionReport contraction_check(const std::vector<double>& errors, double factor, double floor_eps) {
    ContractionReport report;
    for (std::size_t t = 0; t + 1 < errors.size(); ++t) {
        const double bound = factor * errors[t] + floor_eps;
        if (errors[t + 1] > bound) {
            if (report.satisfied) {
                report.satisfied = false;
                report.first_violation = static_cast<int>(t);
            }
            report.worst_excess = std::max(report.worst_excess, errors[t + 1] - bound);
        }
    }
    return report;
}

} // namespace ifca
