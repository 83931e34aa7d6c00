#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace sparsepin {

/// Runs body(i) for i in [0, count) on up to `workers` threads using static
/// contiguous chunks. The body must write only to slot i of its output, which
/// makes any downstream reduction independent of the worker count. The first
/// exception (lowest chunk) is rethrown after all threads join.
template <class Body>
void parallel_for_index(std::size_t count, unsigned workers, Body&& body)
{
    if (workers <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    const std::size_t nthreads = std::min<std::size_t>(workers, count);
    const std::size_t chunk = (count + nthreads - 1) / nthreads;
    std::vector<std::exception_ptr> errors(nthreads);
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (std::size_t t = 0; t < nthreads; ++t) {
        pool.emplace_back([&, t] {
            const std::size_t lo = t * chunk;
            const std::size_t hi = std::min(count, lo + chunk);
            try {
                for (std::size_t i = lo; i < hi; ++i) body(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

inline unsigned default_workers() noexcept
{
    return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace sparsepin
