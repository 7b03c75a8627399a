#pragma once

#include <atomic>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace ifca {

// Thread budget: min(hardware, IFCA_SIM_THREADS env var if set).
inline int resolve_threads(int requested = 0) {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw < 1) hw = 1;
    int n = requested > 0 ? requested : hw;
    if (const char* cap = std::getenv("IFCA_SIM_THREADS")) {
        int c = std::atoi(cap);
        if (c >= 1 && c < n) n = c;
    }
    return n;
}

// Runs fn(i) for i in [0, count). Work is claimed via an atomic counter;
// callers that need reproducible output must write results into
// index-addressed slots and reduce in index order afterwards.
inline void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
    if (count <= 0) return;
    if (threads <= 1 || count == 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    auto worker = [&] {
        for (;;) {
            int i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= count) return;
            fn(i);
        }
    };
    int spawn = std::min(threads, count) - 1;
    std::vector<std::thread> pool;
    pool.reserve(spawn);
    for (int t = 0; t < spawn; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
}

} // namespace ifca
