#include "ifca/checks.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ifca/data.hpp"
#include "ifca/engine.hpp"
#include "ifca/metrics.hpp"
#include "ifca/model.hpp"
#include "ifca/one_shot.hpp"

namespace ifca {

namespace {

std::string fmt_prob(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

bool gradient_matches_fd(const LossModel& model, const ParamVector& theta,
                         const DataView& data, double tol, double& worst) {
    const ParamVector g = gradient(model, theta, data);
    const double h = 1e-5;
    ParamVector probe = theta;
    bool ok = true;
    for (Eigen::Index c = 0; c < theta.size(); ++c) {
        probe[c] = theta[c] + h;
        const double up = empirical_loss(model, probe, data);
        probe[c] = theta[c] - h;
        const double down = empirical_loss(model, probe, data);
        probe[c] = theta[c];
        const double fd = (up - down) / (2.0 * h);
        const double rel = std::abs(fd - g[c]) / std::max(1.0, std::abs(g[c]));
        worst = std::max(worst, rel);
        if (rel > tol) ok = false;
    }
    return ok;
}

} // namespace

CheckResult check_gradients(int instances, double tol, std::uint64_t seed) {
    Rng rng(seed);
    double worst = 0.0;
    int failures = 0;
    const LossModel models[2] = {LossModel::squared_linear(), LossModel::logistic_l2(0.1)};
    for (const LossModel& model : models) {
        for (int inst = 0; inst < instances; ++inst) {
            const int d = 2 + static_cast<int>(rng.uniform_int(15));
            const int n = 1 + static_cast<int>(rng.uniform_int(10));
            Eigen::MatrixXd X(n, d);
            Eigen::VectorXd y(n);
            for (int r = 0; r < n; ++r) {
                for (int c = 0; c < d; ++c) X(r, c) = rng.normal();
                y[r] = model.kind == LossKind::SquaredLinear
                           ? rng.normal()
                           : (rng.uniform() < 0.5 ? 0.0 : 1.0);
            }
            ParamVector theta(d);
            for (int c = 0; c < d; ++c) theta[c] = rng.normal();
            if (!gradient_matches_fd(model, theta, DataView{X, y}, tol, worst)) ++failures;
        }
    }
    CheckResult res;
    res.name = "gradients";
    res.passed = failures == 0;
    res.detail = "worst relative deviation " + fmt_prob(worst) + " over " +
                 std::to_string(2 * instances) + " instances";
    return res;
}

CheckResult check_contraction(int seeds, int rounds, double factor, double floor_eps,
                              std::uint64_t seed) {
    const int k = 2, d = 50, m = 40, n = 50;
    const double R = 1.0;
    const LossModel model = LossModel::squared_linear();

    int passing = 0;
    std::string first_failure;
    for (int s = 0; s < seeds; ++s) {
        const std::uint64_t base = derive_seed(seed, static_cast<std::uint64_t>(s));
        Rng gt_rng(derive_seed(base, 0));
        const GroundTruth gt = generate_ground_truth(k, d, R, 0.0, {}, gt_rng);
        const Federation workers = generate_federation(gt, m, n, derive_seed(base, 1));

        Rng init_rng(derive_seed(base, 2));
        auto init = random_init(k, d, 0.0, InitMode::WarmBall, &gt, 0.25, init_rng);

        const double p = gt.min_proportion();
        EngineConfig cfg;
        cfg.option = UpdateRule::GradAvg;
        cfg.gamma = 1.0 / (4.0 * p);
        cfg.rounds = rounds;

        ServerState state;
        state.models = std::move(init);
        Rng run_rng(derive_seed(base, 3));
        auto max_error = [&](const std::vector<ParamVector>& ms) {
            double e = 0.0;
            for (int j = 0; j < k; ++j) e = std::max(e, (ms[j] - gt.params[j]).norm());
            return e;
        };
        std::vector<double> errors{max_error(state.models)};
        const auto population = all_workers(workers);
        for (int t = 0; t < rounds; ++t) {
            auto [next, report] = ifca_round(state, workers, population, model, cfg, run_rng);
            state = std::move(next);
            errors.push_back(max_error(state.models));
        }
        const ContractionReport rep = contraction_check(errors, factor, floor_eps);
        if (rep.satisfied) {
            ++passing;
        } else if (first_failure.empty()) {
            first_failure = "seed " + std::to_string(s) + " violates at round " +
                            std::to_string(rep.first_violation) + " (excess " +
                            fmt_prob(rep.worst_excess) + ")";
        }
    }
    CheckResult res;
    res.name = "contraction";
    res.passed = passing == seeds;
    res.detail = std::to_string(passing) + "/" + std::to_string(seeds) + " seeds contract";
    if (!first_failure.empty()) res.detail += "; " + first_failure;
    return res;
}

CheckResult check_misclassification_decay(std::vector<int> n_primes, int trials,
                                          std::uint64_t seed, int threads) {
    const int d = 16, k = 2;
    const double delta = 1.0;
    const double alpha = 0.25;
    const double rho = 2.0;

    GroundTruth gt;
    gt.k = k;
    gt.d = d;
    gt.sigma = delta / std::sqrt(rho);
    gt.proportions = {0.5, 0.5};
    ParamVector axis = ParamVector::Zero(d);
    axis[0] = 1.0;
    gt.params = {0.5 * delta * axis, -0.5 * delta * axis};

    // worst-case placement allowed by the closeness condition: each model
    // displaced toward the other center by (1/2 - alpha) * Delta
    const double off = (0.5 - alpha) * delta;
    std::vector<ParamVector> models = {gt.params[0] - off * axis, gt.params[1] + off * axis};

    std::vector<double> estimates;
    Rng rng(seed);
    for (int np : n_primes)
        estimates.push_back(estimate_misclassification(gt, models, alpha, np, trials, rng, threads));

    bool strictly_decreasing = true;
    for (std::size_t i = 0; i + 1 < estimates.size(); ++i)
        if (!(estimates[i + 1] < estimates[i])) strictly_decreasing = false;

    // least-squares slope of log(estimate) vs n'; zero-hit cells clamp to
    // one pseudo-hit so the log stays finite
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const int pts = static_cast<int>(n_primes.size());
    for (int i = 0; i < pts; ++i) {
        const double x = n_primes[i];
        const double y = std::log(std::max(estimates[i], 1.0 / trials));
        sx += x; sy += y; sxx += x * x; sxy += x * y;
    }
    const double slope = (pts * sxy - sx * sy) / (pts * sxx - sx * sx);

    CheckResult res;
    res.name = "misclassification-decay";
    res.passed = strictly_decreasing && slope < 0.0;
    std::ostringstream os;
    os << "estimates:";
    for (std::size_t i = 0; i < estimates.size(); ++i)
        os << " p(" << n_primes[i] << ")=" << estimates[i];
    os << "; log-slope " << slope;
    res.detail = os.str();
    return res;
}

CheckResult check_kmeans_oracle(int seeds, std::uint64_t seed) {
    int matches = 0;
    std::string first_failure;
    for (int s = 0; s < seeds; ++s) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(s)));
        const int m = 4 + static_cast<int>(rng.uniform_int(5));   // 4..8
        const int d = 2 + static_cast<int>(rng.uniform_int(4));
        // two random centers with random spread, like a pile of local ERMs
        ParamVector c0(d), c1(d);
        for (int c = 0; c < d; ++c) { c0[c] = rng.normal(); c1[c] = rng.normal(); }
        const double spread = 0.2 + rng.uniform() * 1.5;
        std::vector<ParamVector> points;
        for (int i = 0; i < m; ++i) {
            ParamVector p = (i % 2 == 0) ? c0 : c1;
            for (int c = 0; c < d; ++c) p[c] += spread * rng.normal();
            points.push_back(std::move(p));
        }

        const KMeansResult km = kmeans(points, 2, 100, 1e-12, 40, rng);

        // exhaustive assignment optimum
        double best = std::numeric_limits<double>::infinity();
        for (int code = 0; code < (1 << m); ++code) {
            ParamVector mean0 = ParamVector::Zero(d), mean1 = ParamVector::Zero(d);
            int n0 = 0, n1 = 0;
            for (int i = 0; i < m; ++i) {
                if (code & (1 << i)) { mean1 += points[i]; ++n1; }
                else { mean0 += points[i]; ++n0; }
            }
            if (n0 > 0) mean0 /= n0;
            if (n1 > 0) mean1 /= n1;
            double inertia = 0.0;
            for (int i = 0; i < m; ++i)
                inertia += (points[i] - ((code & (1 << i)) ? mean1 : mean0)).squaredNorm();
            best = std::min(best, inertia);
        }

        if (std::abs(km.inertia - best) <= 1e-9 * (1.0 + best)) {
            ++matches;
        } else if (first_failure.empty()) {
            first_failure = "seed " + std::to_string(s) + ": kmeans " + fmt_prob(km.inertia) +
                            " vs brute force " + fmt_prob(best);
        }
    }
    CheckResult res;
    res.name = "kmeans-oracle";
    res.passed = matches == seeds;
    res.detail = std::to_string(matches) + "/" + std::to_string(seeds) + " instances optimal";
    if (!first_failure.empty()) res.detail += "; " + first_failure;
    return res;
}

} // namespace ifca
