#pragma once

#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace ipwqr::detail {

// Index-parallel loop with deterministic result placement: workers pull the
// next index from a shared counter and write into caller-owned slots, so the
// fold order never depends on scheduling. The first exception (by index) is
// rethrown after all workers join.
template <typename F>
void parallel_for(int count, int threads, F&& body) {
    if (threads <= 1 || count <= 1) {
        for (int i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(count);
    const int workers = std::min(threads, count);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int t = 0; t < workers; ++t) {
        pool.emplace_back([&]() {
            while (true) {
                const int i = next.fetch_add(1);
                if (i >= count) break;
                try {
                    body(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& err : errors)
        if (err) std::rethrow_exception(err);
}

}  // namespace ipwqr::detail
