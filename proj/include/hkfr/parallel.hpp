#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace hkfr {

// Runs fn(i) for i in [0, n) on at most `concurrency` worker threads.
// The first exception wins and is rethrown after all workers finish.
template <typename Fn>
void parallel_for_index(std::size_t n, std::size_t concurrency, Fn&& fn) {
    if (n == 0) return;
    if (concurrency == 0) concurrency = 1;
    if (concurrency == 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> workers;
    std::size_t n_workers = std::min(concurrency, n);
    workers.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) {
        workers.emplace_back([&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : workers) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace hkfr
