#include "ifca/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ifca/metrics.hpp"
#include "ifca/parallel.hpp"

namespace ifca {

std::vector<int> all_workers(const Federation& workers) {
    std::vector<int> ids(workers.size());
    std::iota(ids.begin(), ids.end(), 0);
    return ids;
}

IdentityEstimate estimate_identity(const LossModel& model,
                                   const std::vector<ParamVector>& models,
                                   const DataView& slice) {
    if (models.empty()) throw std::invalid_argument("estimate_identity: no models");
    if (slice.size() == 0) throw std::invalid_argument("estimate_identity: empty slice");
    IdentityEstimate est;
    est.losses.resize(static_cast<Eigen::Index>(models.size()));
    for (std::size_t j = 0; j < models.size(); ++j)
        est.losses[static_cast<Eigen::Index>(j)] = empirical_loss(model, models[j], slice);
    est.cluster = 0;
    for (Eigen::Index j = 1; j < est.losses.size(); ++j)
        if (est.losses[j] < est.losses[est.cluster]) est.cluster = static_cast<int>(j);
    return est;
}

std::vector<int> sample_participation(const std::vector<int>& population,
                                      double fraction, Rng& rng) {
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw std::invalid_argument("sample_participation: fraction must be in (0, 1]");
    const int m = static_cast<int>(population.size());
    if (fraction == 1.0) return population;
    const int s = std::max(1, static_cast<int>(std::ceil(fraction * m)));
    const auto picks = rng.sample_without_replacement(m, s);
    std::vector<int> out(picks.size());
    for (std::size_t i = 0; i < picks.size(); ++i) out[i] = population[picks[i]];
    return out;
}

namespace {

struct WorkerResult {
    int jhat = 0;
    ParamVector payload;    // gradient (GradAvg) or locally updated model (ModelAvg)
};

// Identity + payload for one worker. The squared-loss full-batch path stacks
// the k models into one GEMM and reuses the chosen residual for the gradient.
WorkerResult process_worker(const WorkerDataset& w, const ServerState& state,
                            const Eigen::MatrixXd& theta_mat,
                            const LossModel& model, const EngineConfig& cfg,
                            std::uint64_t worker_seed, int round) {
    const DataView id_view = cfg.resample ? w.identity_slice(round) : w.all();
    const DataView grad_view = cfg.resample ? w.gradient_slice(round) : w.all();
    const int k = state.k();

    WorkerResult res;
    const bool fast = model.kind == LossKind::SquaredLinear;
    Eigen::VectorXd residual;   // X theta_jhat - y on id_view (fast path only)
    if (fast) {
        const Eigen::MatrixXd pred = id_view.X * theta_mat;              // n x k
        int best = 0;
        double best_loss = (pred.col(0) - id_view.y).squaredNorm();
        for (int j = 1; j < k; ++j) {
            const double lj = (pred.col(j) - id_view.y).squaredNorm();
            if (lj < best_loss) { best_loss = lj; best = j; }
        }
        res.jhat = best;
        if (!cfg.resample) residual = pred.col(best) - id_view.y;
    } else {
        res.jhat = estimate_identity(model, state.models, id_view).cluster;
    }

    const ParamVector& chosen = state.models[res.jhat];
    if (cfg.option == UpdateRule::GradAvg) {
        if (fast && !cfg.resample) {
            res.payload = (2.0 / static_cast<double>(grad_view.size())) *
                          (grad_view.X.transpose() * residual);
        } else {
            res.payload = gradient(model, chosen, grad_view);
        }
    } else {
        Rng wrng(worker_seed);
        res.payload = local_update(model, chosen, grad_view, cfg.gamma, cfg.tau,
                                   cfg.batch, wrng);
    }
    return res;
}

} // namespace

std::pair<ServerState, RoundReport> ifca_round(const ServerState& state,
                                               const Federation& workers,
                                               const std::vector<int>& population,
                                               const LossModel& model,
                                               const EngineConfig& cfg, Rng& rng) {
    if (!(cfg.gamma > 0.0)) throw std::invalid_argument("ifca_round: gamma must be > 0");
    if (cfg.option == UpdateRule::ModelAvg && cfg.tau < 1)
        throw std::invalid_argument("ifca_round: ModelAvg requires tau >= 1");
    const int k = state.k();
    const int m = static_cast<int>(population.size());
    if (m == 0) throw std::invalid_argument("ifca_round: empty population");
    const int d = static_cast<int>(state.models[0].size());

    const auto participants = sample_participation(population, cfg.participation, rng);
    const std::uint64_t round_seed = rng.next_u64();

    // broadcast models as one d x k matrix for the batched identity path
    Eigen::MatrixXd theta_mat(d, k);
    for (int j = 0; j < k; ++j) theta_mat.col(j) = state.models[j];

    std::vector<WorkerResult> results(participants.size());
    parallel_for(static_cast<int>(participants.size()), cfg.threads, [&](int idx) {
        const int wid = participants[idx];
        results[idx] = process_worker(workers[wid], state, theta_mat, model, cfg,
                                      derive_seed(round_seed, static_cast<std::uint64_t>(wid)),
                                      state.round);
    });

    // aggregation, strictly in ascending worker order
    RoundReport report;
    report.round = state.round;
    report.participants = participants;
    report.cluster_sizes.assign(k, 0);

    std::vector<ParamVector> sums(k, ParamVector::Zero(d));
    ParamVector shared_sum;
    const bool has_mask = state.shared_mask.has_value();
    if (has_mask) shared_sum = ParamVector::Zero(d);

    for (std::size_t idx = 0; idx < participants.size(); ++idx) {
        const int wid = participants[idx];
        const WorkerResult& r = results[idx];
        report.assignment.emplace(wid, r.jhat);
        report.cluster_sizes[r.jhat]++;
        sums[r.jhat] += r.payload;
        if (has_mask) shared_sum += r.payload;
    }

    ServerState next = state;
    next.round = state.round + 1;
    report.cluster_empty.assign(k, false);
    const double n_participating = static_cast<double>(participants.size());

    for (int j = 0; j < k; ++j) {
        if (cfg.option == UpdateRule::GradAvg) {
            // theta_j - (gamma/m) sum of gradients; division by the worker
            // count m, not by |S_j|
            next.models[j] = state.models[j] - (cfg.gamma / static_cast<double>(m)) * sums[j];
        } else {
            if (report.cluster_sizes[j] == 0) {
                report.cluster_empty[j] = true;
                next.models[j] = state.models[j];   // carry stale model forward
            } else {
                next.models[j] = sums[j] / static_cast<double>(report.cluster_sizes[j]);
            }
        }
    }

    if (has_mask) {
        // shared coordinates aggregate over all participants regardless of jhat
        ParamVector shared_value(d);
        if (cfg.option == UpdateRule::GradAvg)
            shared_value = state.models[0] - (cfg.gamma / n_participating) * shared_sum;
        else
            shared_value = shared_sum / n_participating;
        const auto& mask = *state.shared_mask;
        for (int c = 0; c < d; ++c) {
            if (!mask[c]) continue;
            for (int j = 0; j < k; ++j) next.models[j][c] = shared_value[c];
        }
    }

    report.update_norms.resize(k);
    for (int j = 0; j < k; ++j) {
        report.update_norms[j] = (next.models[j] - state.models[j]).norm();
        if (!next.models[j].allFinite())
            throw DivergenceError(state.round,
                                  "ifca_round: model " + std::to_string(j) +
                                  " diverged at round " + std::to_string(state.round));
    }
    return {std::move(next), std::move(report)};
}

RunTrace run_ifca(const EngineConfig& cfg, const Federation& workers,
                  const std::vector<int>& population,
                  std::vector<ParamVector> init, const LossModel& model,
                  std::uint64_t seed, const GroundTruth* gt) {
    if (cfg.rounds < 1) throw std::invalid_argument("run_ifca: need T >= 1");
    if (cfg.resample) {
        for (int wid : population) {
            const auto& slices = workers[wid].slices;
            if (!slices || slices->rounds < cfg.rounds)
                throw std::invalid_argument("run_ifca: resample partition missing or shorter than T");
        }
    }

    ServerState state;
    state.models = std::move(init);
    if (cfg.shared_mask) {
        const int d = static_cast<int>(state.models[0].size());
        if (static_cast<int>(cfg.shared_mask->size()) != d)
            throw std::invalid_argument("run_ifca: shared_mask length != d");
        state.shared_mask = cfg.shared_mask;
        // start from one common copy of the shared coordinates
        for (int c = 0; c < d; ++c) {
            if (!(*state.shared_mask)[c]) continue;
            double mean = 0.0;
            for (const auto& mdl : state.models) mean += mdl[c];
            mean /= static_cast<double>(state.models.size());
            for (auto& mdl : state.models) mdl[c] = mean;
        }
    }

    Rng rng(seed);
    RunTrace trace;
    trace.reports.reserve(cfg.rounds);
    EngineConfig round_cfg = cfg;
    for (int t = 0; t < cfg.rounds; ++t) {
        auto [next, report] = ifca_round(state, workers, population, model, round_cfg, rng);
        state = std::move(next);
        if (gt != nullptr) {
            const DistResult dr = dist_metric(state.models, *gt);
            trace.dist.push_back(dr.dist);
            trace.accuracy.push_back(cluster_accuracy(report.assignment, workers, dr.match));
        }
        trace.reports.push_back(std::move(report));
        round_cfg.gamma *= cfg.decay;
    }
    trace.final_models = state.models;

    // first round from which the assignment map never changes again
    if (!trace.reports.empty()) {
        int t = static_cast<int>(trace.reports.size()) - 1;
        while (t > 0 && trace.reports[t - 1].assignment == trace.reports.back().assignment) --t;
        trace.stabilized_round = t;
    }
    return trace;
}

RunTrace run_ifca(const EngineConfig& cfg, const Federation& workers,
                  std::vector<ParamVector> init, const LossModel& model,
                  std::uint64_t seed, const GroundTruth* gt) {
    return run_ifca(cfg, workers, all_workers(workers), std::move(init), model, seed, gt);
}

ParamVector run_global_baseline(const Federation& workers,
                                const std::vector<int>& population,
                                ParamVector init, const LossModel& model,
                                const EngineConfig& cfg, std::uint64_t seed) {
    std::vector<ParamVector> one;
    one.push_back(std::move(init));
    RunTrace trace = run_ifca(cfg, workers, population, std::move(one), model, seed, nullptr);
    return trace.final_models[0];
}

std::vector<ParamVector> run_local_baseline(const Federation& workers,
                                            const ParamVector& init,
                                            const LossModel& model,
                                            double gamma, int steps, int batch,
                                            std::uint64_t seed, int threads) {
    if (steps < 1) throw std::invalid_argument("run_local_baseline: need steps >= 1");
    std::vector<ParamVector> out(workers.size());
    parallel_for(static_cast<int>(workers.size()), threads, [&](int i) {
        Rng wrng(derive_seed(seed, static_cast<std::uint64_t>(i)));
        out[i] = local_update(model, init, workers[i].all(), gamma, steps, batch, wrng);
    });
    return out;
}

} // namespace ifca
