#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace invprop {

// threads <= 0 picks hardware_concurrency.
inline int resolveThreads(int threads)
{
    if (threads > 0)
        return threads;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs fn(item, worker) for item in [0, n). Items are handed out dynamically,
/// worker in [0, workers) identifies per-thread scratch. The first exception
/// thrown by any worker is rethrown after all workers stop.
template <typename Fn>
void parallelFor(std::size_t n, int threads, Fn &&fn)
{
    const int workers = std::max(1, std::min<int>(resolveThreads(threads), static_cast<int>(n)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i, 0);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex errorMutex;
    auto body = [&](int worker) {
        while (!failed.load(std::memory_order_relaxed)) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n)
                break;
            try {
                fn(i, worker);
            } catch (...) {
                std::lock_guard<std::mutex> lock(errorMutex);
                if (!error)
                    error = std::current_exception();
                failed = true;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers - 1));
    for (int w = 1; w < workers; ++w)
        pool.emplace_back(body, w);
    body(0);
    for (auto &t : pool)
        t.join();
    if (error)
        std::rethrow_exception(error);
}

inline int workerCount(std::size_t n, int threads)
{
    return std::max(1, std::min<int>(resolveThreads(threads), static_cast<int>(n)));
}

} // namespace invprop
