#pragma once

// Data-parallel helpers with deterministic results.  Work items write disjoint
// output slots; reductions accumulate fixed-size chunks that are combined in
// index order, so results do not depend on the worker count.

#include <algorithm>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace mvsde {

int max_threads();
void set_max_threads(int n);

/// Run fn(i) for i in [0, n) over a static contiguous partition.
/// threads <= 0 selects the global default.
template <class F>
void parallel_for(std::size_t n, int threads, F&& fn) {
    if (n == 0) return;
    int t = threads > 0 ? threads : max_threads();
    t = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(t), n));
    if (t <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(t));
    const std::size_t chunk = (n + static_cast<std::size_t>(t) - 1) / static_cast<std::size_t>(t);
    for (int w = 0; w < t; ++w) {
        const std::size_t lo = static_cast<std::size_t>(w) * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

/// Deterministic sum of term(i) for i in [0, n): fixed-shape chunk tree whose
/// result is identical for every worker count.
template <class F>
double chunked_sum(std::size_t n, int threads, F&& term) {
    constexpr std::size_t kChunk = 4096;
    const std::size_t n_chunks = (n + kChunk - 1) / kChunk;
    std::vector<double> partial(n_chunks, 0.0);
    parallel_for(n_chunks, threads, [&](std::size_t ci) {
        const std::size_t lo = ci * kChunk;
        const std::size_t hi = std::min(n, lo + kChunk);
        double s = 0;
        for (std::size_t i = lo; i < hi; ++i) s += term(i);
        partial[ci] = s;
    });
    double total = 0;
    for (double p : partial) total += p;
    return total;
}

}  // namespace mvsde
