// SPDX-License-Identifier: Apache-2.0
#include "rtnq/threading.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace rtnq {

namespace {
std::atomic<int> g_threads{0};  // 0 = not set yet, use hardware concurrency

int default_threads() {
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}
}  // namespace

void set_threads(int n) { g_threads.store(std::max(1, n)); }

int threads() {
    const int n = g_threads.load();
    return n > 0 ? n : default_threads();
}

void parallel_for(std::int64_t n, std::int64_t min_items_per_worker,
                  const std::function<void(std::int64_t, std::int64_t)>& fn) {
    if (n <= 0) return;
    const std::int64_t grain = std::max<std::int64_t>(1, min_items_per_worker);
    const int nworkers = static_cast<int>(
        std::min<std::int64_t>(threads(), (n + grain - 1) / grain));
    if (nworkers <= 1) {
        fn(0, n);
        return;
    }

    // Static contiguous partition; worker w handles [w*chunk, min(n, (w+1)*chunk)).
    const std::int64_t chunk = (n + nworkers - 1) / nworkers;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nworkers - 1));
    for (int w = 1; w < nworkers; ++w) {
        const std::int64_t b = w * chunk;
        const std::int64_t e = std::min<std::int64_t>(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&fn, b, e] { fn(b, e); });
    }
    fn(0, std::min<std::int64_t>(n, chunk));
    for (auto& t : pool) t.join();
}

}  // namespace rtnq
