#pragma once

#include <cstdint>
#include <random>
#include <vector>
#include <cmath>
#include <numeric>
#include <algorithm>

namespace ifca {

// One round of splitmix64. Used both as a seed scrambler and as the
// child-seed derivation primitive.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Deterministic seed tree: child = derive_seed(parent, index).
// The whole experiment pipeline derives every seed through this function
// (master -> trial -> restart -> round -> worker), so parallel and serial
// execution consume identical random streams.
inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) {
    return splitmix64(parent ^ splitmix64(index + 1));
}

// Seeded random source. All distributions are implemented on top of the
// raw 64-bit stream so results do not depend on the standard library's
// (implementation-defined) distribution code.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(splitmix64(seed)) {}

    std::uint64_t next_u64() { return gen_(); }

    // uniform double in [0, 1), 53 random bits
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    // uniform double in (0, 1]
    double uniform_pos() { return 1.0 - uniform(); }

    // unbiased integer in [0, n)
    std::uint64_t uniform_int(std::uint64_t n) {
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t v;
        do { v = gen_(); } while (v >= limit);
        return v % n;
    }

    // standard normal via Box-Muller; the sine partner is cached
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_pos();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    // Bernoulli(1/2) coordinate, as 0.0 or 1.0
    double coin() { return (gen_() >> 63) ? 1.0 : 0.0; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[uniform_int(i)]);
    }

    // s distinct indices from [0, n), returned sorted
    std::vector<int> sample_without_replacement(int n, int s) {
        std::vector<int> pool(n);
        std::iota(pool.begin(), pool.end(), 0);
        for (int i = 0; i < s; ++i)
            std::swap(pool[i], pool[i + uniform_int(static_cast<std::uint64_t>(n - i))]);
        pool.resize(s);
        std::sort(pool.begin(), pool.end());
        return pool;
    }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace ifca
