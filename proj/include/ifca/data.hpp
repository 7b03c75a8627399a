#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "ifca/model.hpp"
#include "ifca/rng.hpp"

namespace ifca {

// Latent cluster parameters. separation/snr are always recomputed from
// params, never cached.
struct GroundTruth {
    int k = 0;
    int d = 0;
    std::vector<ParamVector> params;    // theta*_1..k
    double sigma = 0.0;
    std::vector<double> proportions;    // p_1..k, sums to 1

    // min_{j != j'} ||theta*_j - theta*_j'||; +inf when k == 1
    double separation() const;
    // rho = Delta^2 / sigma^2
    double snr() const { double s = separation(); return s * s / (sigma * sigma); }
    double min_proportion() const;
};

// Re-sampling partition: the first 2T*n' rows of a worker's data are split
// into T identity slices and T gradient slices, interleaved per round:
//   identity slice t = rows [2t*n', (2t+1)*n')
//   gradient slice t = rows [(2t+1)*n', (2t+2)*n')
struct SlicePartition {
    int rounds = 0;     // T
    int slice_size = 0; // n' = floor(n / 2T)
};

struct WorkerDataset {
    int worker_id = 0;
    Eigen::MatrixXd X;  // n x d
    Eigen::VectorXd y;  // n
    int true_cluster = 0;   // evaluation-only; algorithms never read it
    std::optional<SlicePartition> slices;

    int n() const { return static_cast<int>(X.rows()); }
    int dim() const { return static_cast<int>(X.cols()); }

    DataView all() const { return {X, y}; }
    DataView identity_slice(int t) const;
    DataView gradient_slice(int t) const;
};

// theta*_j ~ Bernoulli(0.5) coordinate-wise, rescaled to ||theta*_j|| = R.
// All-zero draws (probability 2^-d) are redrawn.
GroundTruth generate_ground_truth(int k, int d, double R, double sigma,
                                  const std::vector<double>& proportions, Rng& rng);

// Worker i in cluster j receives n i.i.d. points with x ~ N(0, I_d) and
//   SquaredLinear: y = <x, theta*_j> + sigma * N(0,1)
//   LogisticL2:    y = 1 with probability sigmoid(<x, theta*_j>)
// Cluster sizes follow largest-remainder rounding of p_j * m. Each worker's
// points are drawn from derive_seed(seed, worker_id) so per-worker
// generation order does not matter.
std::vector<WorkerDataset> generate_federation(const GroundTruth& gt, int m, int n,
                                               std::uint64_t seed,
                                               LossKind kind = LossKind::SquaredLinear);

WorkerDataset resample_partition(WorkerDataset dataset, int T);

enum class InitMode { Bernoulli, WarmBall };

// Bernoulli: coordinate-wise {0,1} rescaled to `scale` (all-zero redrawn).
// WarmBall: theta*_j + u with ||u|| = (1/2 - alpha0) * Delta * beta,
// u uniform on the sphere, beta uniform in (0,1].
std::vector<ParamVector> random_init(int k, int d, double scale, InitMode mode,
                                     const GroundTruth* gt, double alpha0, Rng& rng);

// Binary dump/load. Layout (little endian):
//   magic "IFCAFED1", u32 k, u32 d, u32 m, u32 n, f64 sigma, u64 seed,
//   k * d f64 ground-truth params (row per cluster),
//   k f64 proportions,
//   then per worker: u32 true_cluster, n*d f64 X row-major, n f64 y.
void save_federation(const std::string& path, const GroundTruth& gt,
                     const std::vector<WorkerDataset>& workers, std::uint64_t seed);

struct LoadedFederation {
    GroundTruth gt;
    std::vector<WorkerDataset> workers;
    std::uint64_t seed = 0;
};

LoadedFederation load_federation(const std::string& path);

} // namespace ifca
