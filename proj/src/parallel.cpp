#include "mvsde/parallel.hpp"

#include <atomic>

namespace mvsde {

namespace {
std::atomic<int> g_max_threads{0};
}

int max_threads() {
    const int n = g_max_threads.load(std::memory_order_relaxed);
    if (n > 0) return n;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void set_max_threads(int n) { g_max_threads.store(n, std::memory_order_relaxed); }

}  // namespace mvsde
