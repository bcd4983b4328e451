#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace tailbound {

// Run task(0) .. task(n_tasks - 1) across up to n_threads workers pulling from
// a shared counter.  n_threads <= 0 means one worker per hardware thread.
// Tasks must not share mutable state; the first exception thrown by any task
// is rethrown on the calling thread after all workers drain.
//
// Task order is unspecified, so determinism is the task's job: anything random
// inside must draw from a stream addressed by the task index alone.
inline void parallel_for(std::size_t n_tasks, int n_threads,
                         const std::function<void(std::size_t)>& task) {
    if (n_tasks == 0) return;
    std::size_t workers = n_threads > 0 ? static_cast<std::size_t>(n_threads)
                                        : std::thread::hardware_concurrency();
    if (workers == 0) workers = 1;
    workers = std::min(workers, n_tasks);

    if (workers == 1) {
        for (std::size_t i = 0; i < n_tasks; ++i) task(i);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= n_tasks) return;
            try {
                task(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace tailbound
