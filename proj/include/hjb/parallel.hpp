#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace hjb {

// HJB_THREADS caps the worker count; 0 or unset means hardware concurrency.
inline int thread_count()
{
    int hw = std::max(1u, std::thread::hardware_concurrency());
    const char* env = std::getenv("HJB_THREADS");
    if (!env || !*env) return hw;
    int n = std::atoi(env);
    return n <= 0 ? hw : n;
}

// Runs body(row) for row in [lo, hi) over contiguous chunks. Each row must touch only
// its own output, so the result does not depend on the thread count. The exception
// from the lowest failing row is rethrown.
template <class Body>
void parallel_rows(int lo, int hi, Body&& body, int threads = thread_count())
{
    int n = hi - lo;
    if (n <= 0) return;
    threads = std::clamp(threads, 1, n);
    if (threads == 1 || n < 8) {
        for (int r = lo; r < hi; ++r) body(r);
        return;
    }
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) {
        int a = lo + int((long long)n * t / threads);
        int b = lo + int((long long)n * (t + 1) / threads);
        pool.emplace_back([&, a, b, t] {
            try {
                for (int r = a; r < b; ++r) body(r);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace hjb
