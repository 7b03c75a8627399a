#include "ifca/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace ifca {

double GroundTruth::separation() const {
    if (k <= 1) return std::numeric_limits<double>::infinity();
    double best = std::numeric_limits<double>::infinity();
    for (int a = 0; a < k; ++a)
        for (int b = a + 1; b < k; ++b)
            best = std::min(best, (params[a] - params[b]).norm());
    return best;
}

double GroundTruth::min_proportion() const {
    return *std::min_element(proportions.begin(), proportions.end());
}

DataView WorkerDataset::identity_slice(int t) const {
    if (!slices || t < 0 || t >= slices->rounds)
        throw std::invalid_argument("identity_slice: no partition or round out of range");
    const int np = slices->slice_size;
    return {X.middleRows(2 * t * np, np), y.segment(2 * t * np, np)};
}

DataView WorkerDataset::gradient_slice(int t) const {
    if (!slices || t < 0 || t >= slices->rounds)
        throw std::invalid_argument("gradient_slice: no partition or round out of range");
    const int np = slices->slice_size;
    return {X.middleRows((2 * t + 1) * np, np), y.segment((2 * t + 1) * np, np)};
}

namespace {

ParamVector bernoulli_rescaled(int d, double scale, Rng& rng) {
    ParamVector v(d);
    for (;;) {
        for (int i = 0; i < d; ++i) v[i] = rng.coin();
        const double norm = v.norm();
        if (norm > 0.0) return v * (scale / norm);
    }
}

double sigmoid(double t) {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

// Largest-remainder apportionment of m workers to proportions.
std::vector<int> cluster_counts(const std::vector<double>& proportions, int m) {
    const int k = static_cast<int>(proportions.size());
    std::vector<int> counts(k);
    std::vector<std::pair<double, int>> remainders(k);
    int assigned = 0;
    for (int j = 0; j < k; ++j) {
        const double exact = proportions[j] * m;
        counts[j] = static_cast<int>(std::floor(exact));
        assigned += counts[j];
        remainders[j] = {exact - counts[j], j};
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (int r = 0; r < m - assigned; ++r) counts[remainders[r % k].second]++;
    for (int j = 0; j < k; ++j)
        if (counts[j] == 0)
            throw std::invalid_argument("generate_federation: cluster " + std::to_string(j) +
                                        " empty after rounding; increase m or proportions");
    return counts;
}

} // namespace

GroundTruth generate_ground_truth(int k, int d, double R, double sigma,
                                  const std::vector<double>& proportions, Rng& rng) {
    if (k < 1 || d < 1) throw std::invalid_argument("generate_ground_truth: k and d must be >= 1");
    if (!(R > 0.0)) throw std::invalid_argument("generate_ground_truth: R must be > 0");
    if (sigma < 0.0) throw std::invalid_argument("generate_ground_truth: sigma must be >= 0");

    GroundTruth gt;
    gt.k = k;
    gt.d = d;
    gt.sigma = sigma;
    if (proportions.empty()) {
        gt.proportions.assign(k, 1.0 / k);
    } else {
        if (static_cast<int>(proportions.size()) != k)
            throw std::invalid_argument("generate_ground_truth: proportions size != k");
        const double total = std::accumulate(proportions.begin(), proportions.end(), 0.0);
        if (std::abs(total - 1.0) > 1e-9)
            throw std::invalid_argument("generate_ground_truth: proportions must sum to 1");
        gt.proportions = proportions;
    }
    gt.params.reserve(k);
    for (int j = 0; j < k; ++j) gt.params.push_back(bernoulli_rescaled(d, R, rng));
    return gt;
}

std::vector<WorkerDataset> generate_federation(const GroundTruth& gt, int m, int n,
                                               std::uint64_t seed, LossKind kind) {
    if (m < gt.k) throw std::invalid_argument("generate_federation: m must be >= k");
    if (n < 1) throw std::invalid_argument("generate_federation: n must be >= 1");

    const auto counts = cluster_counts(gt.proportions, m);
    std::vector<int> assignment;
    assignment.reserve(m);
    for (int j = 0; j < gt.k; ++j) assignment.insert(assignment.end(), counts[j], j);

    std::vector<WorkerDataset> workers(m);
    for (int i = 0; i < m; ++i) {
        Rng wrng(derive_seed(seed, static_cast<std::uint64_t>(i)));
        WorkerDataset& w = workers[i];
        w.worker_id = i;
        w.true_cluster = assignment[i];
        w.X.resize(n, gt.d);
        w.y.resize(n);
        const ParamVector& theta = gt.params[w.true_cluster];
        for (int r = 0; r < n; ++r) {
            for (int c = 0; c < gt.d; ++c) w.X(r, c) = wrng.normal();
            const double margin = w.X.row(r).dot(theta);
            if (kind == LossKind::SquaredLinear)
                w.y[r] = margin + gt.sigma * wrng.normal();
            else
                w.y[r] = wrng.uniform() < sigmoid(margin) ? 1.0 : 0.0;
        }
    }
    return workers;
}

WorkerDataset resample_partition(WorkerDataset dataset, int T) {
    if (T < 1) throw std::invalid_argument("resample_partition: T must be >= 1");
    if (dataset.n() < 2 * T)
        throw std::invalid_argument("resample_partition: need n >= 2T (n=" +
                                    std::to_string(dataset.n()) + ", T=" + std::to_string(T) + ")");
    dataset.slices = SlicePartition{T, dataset.n() / (2 * T)};
    return dataset;
}

std::vector<ParamVector> random_init(int k, int d, double scale, InitMode mode,
                                     const GroundTruth* gt, double alpha0, Rng& rng) {
    std::vector<ParamVector> init;
    init.reserve(k);
    if (mode == InitMode::Bernoulli) {
        if (!(scale > 0.0)) throw std::invalid_argument("random_init: scale must be > 0");
        for (int j = 0; j < k; ++j) init.push_back(bernoulli_rescaled(d, scale, rng));
        return init;
    }
    // WarmBall
    if (gt == nullptr || gt->k != k || gt->d != d)
        throw std::invalid_argument("random_init: WarmBall requires matching ground truth");
    if (!(alpha0 > 0.0 && alpha0 < 0.5))
        throw std::invalid_argument("random_init: WarmBall requires alpha0 in (0, 1/2)");
    const double radius = (0.5 - alpha0) * gt->separation();
    if (!std::isfinite(radius))
        throw std::invalid_argument("random_init: WarmBall undefined for k == 1");
    for (int j = 0; j < k; ++j) {
        ParamVector u(d);
        double norm = 0.0;
        do {
            for (int i = 0; i < d; ++i) u[i] = rng.normal();
            norm = u.norm();
        } while (norm == 0.0);
        const double beta = rng.uniform_pos();
        init.push_back(gt->params[j] + u * (radius * beta / norm));
    }
    return init;
}

// --- binary dump/load ---

namespace {

constexpr char kMagic[8] = {'I', 'F', 'C', 'A', 'F', 'E', 'D', '1'};

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

} // namespace

void save_federation(const std::string& path, const GroundTruth& gt,
                     const std::vector<WorkerDataset>& workers, std::uint64_t seed) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_federation: cannot open " + path);
    const std::uint32_t m = static_cast<std::uint32_t>(workers.size());
    const std::uint32_t n = m > 0 ? static_cast<std::uint32_t>(workers[0].n()) : 0;
    os.write(kMagic, sizeof(kMagic));
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(gt.k));
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(gt.d));
    write_pod<std::uint32_t>(os, m);
    write_pod<std::uint32_t>(os, n);
    write_pod<double>(os, gt.sigma);
    write_pod<std::uint64_t>(os, seed);
    for (const auto& p : gt.params)
        os.write(reinterpret_cast<const char*>(p.data()), gt.d * sizeof(double));
    os.write(reinterpret_cast<const char*>(gt.proportions.data()), gt.k * sizeof(double));
    for (const auto& w : workers) {
        write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(w.true_cluster));
        // X is column-major in memory; dump row-major as documented
        for (int r = 0; r < w.n(); ++r)
            for (int c = 0; c < w.dim(); ++c)
                write_pod<double>(os, w.X(r, c));
        os.write(reinterpret_cast<const char*>(w.y.data()), w.n() * sizeof(double));
    }
    if (!os) throw std::runtime_error("save_federation: write failed for " + path);
}

LoadedFederation load_federation(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_federation: cannot open " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("load_federation: bad magic in " + path);
    LoadedFederation out;
    out.gt.k = static_cast<int>(read_pod<std::uint32_t>(is));
    out.gt.d = static_cast<int>(read_pod<std::uint32_t>(is));
    const int m = static_cast<int>(read_pod<std::uint32_t>(is));
    const int n = static_cast<int>(read_pod<std::uint32_t>(is));
    out.gt.sigma = read_pod<double>(is);
    out.seed = read_pod<std::uint64_t>(is);
    out.gt.params.assign(out.gt.k, ParamVector(out.gt.d));
    for (auto& p : out.gt.params)
        is.read(reinterpret_cast<char*>(p.data()), out.gt.d * sizeof(double));
    out.gt.proportions.resize(out.gt.k);
    is.read(reinterpret_cast<char*>(out.gt.proportions.data()), out.gt.k * sizeof(double));
    out.workers.resize(m);
    for (int i = 0; i < m; ++i) {
        WorkerDataset& w = out.workers[i];
        w.worker_id = i;
        w.true_cluster = static_cast<int>(read_pod<std::uint32_t>(is));
        w.X.resize(n, out.gt.d);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < out.gt.d; ++c)
                w.X(r, c) = read_pod<double>(is);
        w.y.resize(n);
        is.read(reinterpret_cast<char*>(w.y.data()), n * sizeof(double));
    }
    if (!is) throw std::runtime_error("load_federation: truncated file " + path);
    return out;
}

} // namespace ifca
