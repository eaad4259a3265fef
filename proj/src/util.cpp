#include "sievehom/util.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

namespace sievehom {

namespace {
std::atomic<int> g_threads{1};
constexpr int kMaxThreads = 64;
}  // namespace

void set_num_threads(int n) {
    if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
    g_threads.store(std::clamp(n, 1, kMaxThreads));
}

int num_threads() { return g_threads.load(); }

namespace detail {

void parallel_ranges(std::size_t n, const std::function<void(std::size_t, std::size_t, int)>& fn) {
    if (n == 0) return;
    int t = num_threads();
    if (t <= 1 || n < 4096) {
        fn(0, n, 0);
        return;
    }
    std::size_t chunk = (n + static_cast<std::size_t>(t) - 1) / static_cast<std::size_t>(t);
    std::vector<std::thread> workers;
    int c = 0;
    for (std::size_t b = 0; b < n; b += chunk, ++c) {
        std::size_t e = std::min(n, b + chunk);
        if (e == n)
            fn(b, e, c);  // run the tail chunk on this thread
        else
            workers.emplace_back(fn, b, e, c);
    }
    for (auto& w : workers) w.join();
}

}  // namespace detail

}  // namespace sievehom
