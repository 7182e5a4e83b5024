#pragma once

#include <condition_variable>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#if defined(__SSE2__)
#include <xmmintrin.h>
#endif

namespace lgn {

// Flush subnormal floats to zero on the calling thread. Late in temperature
// annealing, stale optimizer state and near-zero mixture weights decay through
// the subnormal range, where x86 falls back to microcode and epochs slow down
// by an order of magnitude; the flushed values are below any tolerance used
// here. No-op on targets without SSE.
inline void flush_denormals_on_this_thread() {
#if defined(__SSE2__)
  _mm_setcsr(_mm_getcsr() | 0x8040);  // FTZ | DAZ
#endif
}

// Fixed-size pool running one task per worker index. Training shards each
// batch into contiguous per-worker slices and merges worker-local results in
// worker order, so runs are reproducible for a given worker count.
class WorkerPool {
 public:
  explicit WorkerPool(int workers) : n_(workers < 1 ? 1 : workers) {
    for (int i = 1; i < n_; ++i) threads_.emplace_back([this, i] { loop(i); });
  }

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  ~WorkerPool() {
    {
      std::unique_lock lk(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  int size() const { return n_; }

  // Blocks until fn(0) .. fn(n-1) have all returned; fn(0) runs on the caller.
  void run(const std::function<void(int)>& fn) {
    flush_denormals_on_this_thread();
    if (n_ == 1) {
      fn(0);
      return;
    }
    {
      std::unique_lock lk(mu_);
      fn_ = &fn;
      pending_ = n_ - 1;
      ++generation_;
    }
    cv_.notify_all();
    fn(0);
    std::unique_lock lk(mu_);
    done_cv_.wait(lk, [this] { return pending_ == 0; });
    fn_ = nullptr;
  }

 private:
  void loop(int index) {
    flush_denormals_on_this_thread();
    uint64_t seen = 0;
    for (;;) {
      const std::function<void(int)>* fn;
      {
        std::unique_lock lk(mu_);
        cv_.wait(lk, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
        fn = fn_;
      }
      (*fn)(index);
      {
        std::unique_lock lk(mu_);
        if (--pending_ == 0) done_cv_.notify_all();
      }
    }
  }

  int n_;
  std::vector<std::thread> threads_;
  std::mutex mu_;
  std::condition_variable cv_, done_cv_;
  const std::function<void(int)>* fn_ = nullptr;
  int pending_ = 0;
  uint64_t generation_ = 0;
  bool stop_ = false;
};

}  // namespace lgn
