#include "quanta/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <mutex>
#include <thread>
#include <vector>

namespace quanta {
namespace {

thread_local bool t_inside_worker = false;

// One persistent pool; workers sleep between jobs. A job is a chunked index
// range plus the body to run; chunks are claimed through an atomic cursor.
class Pool {
public:
    static Pool& instance() {
        static Pool pool;
        return pool;
    }

    void resize(int n) {
        std::unique_lock<std::mutex> lk(run_mutex_);
        n = std::max(1, n);
        if (n == requested_ + 1) return;
        shutdown_workers();
        requested_ = n - 1;
        spawn_workers();
    }

    int size() const { return requested_ + 1; }

    void run(std::int64_t begin, std::int64_t end,
             const std::function<void(std::int64_t, std::int64_t)>& body) {
        const std::int64_t count = end - begin;
        if (count <= 0) return;
        if (t_inside_worker || requested_ == 0 || count == 1) {
            body(begin, end);
            return;
        }
        std::unique_lock<std::mutex> lk(run_mutex_);

        const int workers = static_cast<int>(std::min<std::int64_t>(requested_ + 1, count));
        chunk_count_ = workers;
        chunk_begin_ = begin;
        chunk_end_ = end;
        body_ = &body;
        next_chunk_.store(0, std::memory_order_relaxed);
        pending_.store(chunk_count_, std::memory_order_relaxed);
        {
            std::lock_guard<std::mutex> jl(job_mutex_);
            ++generation_;
        }
        job_cv_.notify_all();

        work();  // main thread participates

        std::unique_lock<std::mutex> jl(job_mutex_);
        done_cv_.wait(jl, [this] { return pending_.load(std::memory_order_acquire) == 0; });
        body_ = nullptr;
    }

private:
    Pool() { spawn_workers(); }

    ~Pool() {
        std::unique_lock<std::mutex> lk(run_mutex_);
        shutdown_workers();
    }

    void spawn_workers() {
        stop_ = false;
        for (int i = 0; i < requested_; ++i)
            threads_.emplace_back([this] { worker_loop(); });
    }

    void shutdown_workers() {
        {
            std::lock_guard<std::mutex> jl(job_mutex_);
            stop_ = true;
            ++generation_;
        }
        job_cv_.notify_all();
        for (auto& t : threads_) t.join();
        threads_.clear();
    }

    void worker_loop() {
        t_inside_worker = true;
        std::uint64_t seen = 0;
        while (true) {
            {
                std::unique_lock<std::mutex> jl(job_mutex_);
                job_cv_.wait(jl, [&] { return generation_ != seen; });
                seen = generation_;
                if (stop_) return;
            }
            work();
        }
    }

    void work() {
        const bool was_inside = t_inside_worker;
        t_inside_worker = true;
        while (true) {
            const int chunk = next_chunk_.fetch_add(1, std::memory_order_relaxed);
            if (chunk >= chunk_count_) break;
            const std::int64_t count = chunk_end_ - chunk_begin_;
            const std::int64_t lo = chunk_begin_ + count * chunk / chunk_count_;
            const std::int64_t hi = chunk_begin_ + count * (chunk + 1) / chunk_count_;
            if (lo < hi) (*body_)(lo, hi);
            if (pending_.fetch_sub(1, std::memory_order_acq_rel) == 1) {
                std::lock_guard<std::mutex> jl(job_mutex_);
                done_cv_.notify_all();
            }
        }
        t_inside_worker = was_inside;
    }

    std::mutex run_mutex_;  // serializes top-level parallel_for calls
    std::mutex job_mutex_;
    std::condition_variable job_cv_, done_cv_;
    std::vector<std::thread> threads_;
    int requested_ = 0;  // workers beyond the calling thread
    bool stop_ = false;
    std::uint64_t generation_ = 0;

    const std::function<void(std::int64_t, std::int64_t)>* body_ = nullptr;
    std::int64_t chunk_begin_ = 0, chunk_end_ = 0;
    int chunk_count_ = 0;
    std::atomic<int> next_chunk_{0};
    std::atomic<int> pending_{0};
};

}  // namespace

void set_thread_count(int n) { Pool::instance().resize(n); }

int thread_count() { return Pool::instance().size(); }

void parallel_for(std::int64_t begin, std::int64_t end,
                  const std::function<void(std::int64_t, std::int64_t)>& body) {
    Pool::instance().run(begin, end, body);
}

}  // namespace quanta
