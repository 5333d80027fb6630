// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace hgs {

/// Shared worker pool for data-parallel kernels.
///
/// Work is always split into a fixed chunk grid that does not depend on the
/// worker count, so kernels that either write disjoint outputs per chunk or
/// merge per-chunk partials in chunk order stay bit-deterministic for any
/// thread count.
class ThreadPool {
public:
    static ThreadPool& instance() {
        static ThreadPool pool;
        return pool;
    }

    int worker_count() const { return int(workers_.size()) + 1; }

    /// Runs fn(chunk) for chunk in [0, chunks). Blocks until all are done.
    void run_chunks(int chunks, const std::function<void(int)>& fn) {
        if (chunks <= 0) return;
        if (chunks == 1 || workers_.empty()) {
            for (int c = 0; c < chunks; ++c) fn(c);
            return;
        }
        std::unique_lock<std::mutex> lk(mu_);
        task_ = &fn;
        next_chunk_.store(0, std::memory_order_relaxed);
        chunk_count_ = chunks;
        done_chunks_ = 0;
        ++generation_;
        ++active_;
        cv_work_.notify_all();
        lk.unlock();
        drain(fn);
        lk.lock();
        --active_;
        cv_done_.wait(lk, [&] { return done_chunks_ == chunk_count_ && active_ == 0; });
        task_ = nullptr;
    }

    static int env_thread_count() {
        if (const char* e = std::getenv("HGS_THREADS")) {
            int v = std::atoi(e);
            if (v >= 1) return v;
        }
        unsigned hc = std::thread::hardware_concurrency();
        return hc == 0 ? 1 : int(hc);
    }

private:
    ThreadPool() {
        int n = env_thread_count();
        for (int i = 1; i < n; ++i)
            workers_.emplace_back([this] { worker_loop(); });
    }

    ~ThreadPool() {
        {
            std::lock_guard<std::mutex> lk(mu_);
            stop_ = true;
            cv_work_.notify_all();
        }
        for (auto& w : workers_) w.join();
    }

    void drain(const std::function<void(int)>& fn) {
        while (true) {
            int c = next_chunk_.fetch_add(1, std::memory_order_relaxed);
            if (c >= chunk_count_) break;
            fn(c);
            std::lock_guard<std::mutex> lk(mu_);
            if (++done_chunks_ == chunk_count_) cv_done_.notify_all();
        }
    }

    void worker_loop() {
        uint64_t seen = 0;
        while (true) {
            const std::function<void(int)>* fn = nullptr;
            {
                std::unique_lock<std::mutex> lk(mu_);
                cv_work_.wait(lk, [&] { return stop_ || generation_ != seen; });
                if (stop_) return;
                seen = generation_;
                fn = task_;
                if (!fn) continue;
                ++active_;
            }
            drain(*fn);
            {
                std::lock_guard<std::mutex> lk(mu_);
                --active_;
                if (done_chunks_ == chunk_count_ && active_ == 0) cv_done_.notify_all();
            }
        }
    }

    std::vector<std::thread> workers_;
    std::mutex mu_;
    std::condition_variable cv_work_, cv_done_;
    const std::function<void(int)>* task_ = nullptr;
    std::atomic<int> next_chunk_{0};
    int chunk_count_ = 0;
    int done_chunks_ = 0;
    int active_ = 0;
    uint64_t generation_ = 0;
    bool stop_ = false;
};

/// Splits [0, n) into roughly equal ranges and runs body(begin, end) per
/// range. The grid depends only on n, never on the worker count.
template <class Body>
void parallel_ranges(int64_t n, const Body& body, int64_t min_grain = 1) {
    if (n <= 0) return;
    int64_t grain = std::max<int64_t>(min_grain, 1);
    int chunks = int(std::min<int64_t>((n + grain - 1) / grain, 64));
    if (chunks <= 1) {
        body(0, n);
        return;
    }
    ThreadPool::instance().run_chunks(chunks, [&](int c) {
        int64_t b = n * c / chunks;
        int64_t e = n * (c + 1) / chunks;
        if (b < e) body(b, e);
    });
}

} // namespace hgs
