#ifndef TEXTSR_PARALLEL_HPP
#define TEXTSR_PARALLEL_HPP

#include <atomic>
#include <condition_variable>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace textsr {

// Persistent pool with static chunking. Every output element is computed by
// exactly one worker with a serial inner loop, so results are bitwise
// identical for any thread count.
class ThreadPool {
public:
    static ThreadPool& instance() {
        static ThreadPool pool;
        return pool;
    }

    static void set_threads(int n) { instance().resize(n); }
    int threads() const { return static_cast<int>(workers_.size()) + 1; }

    // fn(chunk_begin, chunk_end) over [0, n) split into contiguous ranges.
    // Nested calls from inside a running region execute inline.
    void run(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
        if (n <= 0) return;
        int nt = threads();
        if (nt <= 1 || n == 1 || in_region()) {
            fn(0, n);
            return;
        }
        RegionGuard guard;
        if (static_cast<int64_t>(nt) > n) nt = static_cast<int>(n);
        std::lock_guard<std::mutex> run_lock(run_mutex_);
        int64_t chunk = (n + nt - 1) / nt;
        pending_.store(nt - 1, std::memory_order_release);
        {
            std::lock_guard<std::mutex> lk(mutex_);
            tasks_.clear();
            for (int t = 1; t < nt; t++) {
                int64_t lo = t * chunk;
                int64_t hi = std::min<int64_t>(n, lo + chunk);
                if (lo < hi) tasks_.push_back([&fn, lo, hi] { fn(lo, hi); });
                else pending_.fetch_sub(1, std::memory_order_acq_rel);
            }
            generation_++;
        }
        cv_.notify_all();
        fn(0, std::min<int64_t>(n, chunk));
        // wait for workers
        std::unique_lock<std::mutex> lk(done_mutex_);
        done_cv_.wait(lk, [this] { return pending_.load(std::memory_order_acquire) == 0; });
    }

    ~ThreadPool() { resize(1); }

private:
    static bool& in_region() {
        thread_local bool flag = false;
        return flag;
    }
    struct RegionGuard {
        RegionGuard() { in_region() = true; }
        ~RegionGuard() { in_region() = false; }
    };

    ThreadPool() { resize(static_cast<int>(std::thread::hardware_concurrency())); }

    void resize(int n) {
        if (n < 1) n = 1;
        {
            std::lock_guard<std::mutex> lk(mutex_);
            stop_ = true;
            generation_++;
        }
        cv_.notify_all();
        for (auto& w : workers_) w.join();
        workers_.clear();
        stop_ = false;
        for (int i = 1; i < n; i++)
            workers_.emplace_back([this] { worker_loop(); });
    }

    void worker_loop() {
        in_region() = true;  // workers always run nested regions inline
        uint64_t seen = 0;
        while (true) {
            std::function<void()> task;
            {
                std::unique_lock<std::mutex> lk(mutex_);
                cv_.wait(lk, [&] { return stop_ || generation_ != seen; });
                seen = generation_;
                if (stop_) return;
                if (!tasks_.empty()) {
                    task = std::move(tasks_.back());
                    tasks_.pop_back();
                }
            }
            while (task) {
                task();
                if (pending_.fetch_sub(1, std::memory_order_acq_rel) == 1) {
                    std::lock_guard<std::mutex> lk(done_mutex_);
                    done_cv_.notify_all();
                }
                std::lock_guard<std::mutex> lk(mutex_);
                if (!tasks_.empty()) {
                    task = std::move(tasks_.back());
                    tasks_.pop_back();
                } else {
                    task = nullptr;
                }
            }
        }
    }

    std::vector<std::thread> workers_;
    std::vector<std::function<void()>> tasks_;
    std::mutex mutex_, done_mutex_, run_mutex_;
    std::condition_variable cv_, done_cv_;
    std::atomic<int> pending_{0};
    uint64_t generation_ = 0;
    bool stop_ = false;
};

inline void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
    ThreadPool::instance().run(n, fn);
}

}  // namespace textsr

#endif  // TEXTSR_PARALLEL_HPP
