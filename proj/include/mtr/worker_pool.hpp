#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace mtr {

/// Run fn(i) for i in [0, count) on up to `workers` threads. Tasks write
/// their results into pre-sized slots indexed by i, so output never depends
/// on scheduling. workers == 0 means hardware concurrency; 1 is fully serial.
/// The first exception thrown by any task is rethrown after all threads join.
template <typename Fn>
void parallel_for(size_t count, size_t workers, Fn&& fn) {
    if (workers == 0) {
        workers = std::thread::hardware_concurrency();
        if (workers == 0) workers = 1;
    }
    if (workers == 1 || count <= 1) {
        for (size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    workers = std::min(workers, count);

    std::atomic<size_t> next{0};
    std::exception_ptr first_error;
    std::atomic<bool> failed{false};
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&] {
            for (;;) {
                size_t i = next.fetch_add(1);
                if (i >= count || failed.load()) return;
                try {
                    fn(i);
                } catch (...) {
                    if (!failed.exchange(true)) first_error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace mtr
