#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "nerfgs/common.hpp"

namespace nerfgs {

// Persistent worker pool with deterministic work assignment: worker w always
// receives chunk w of a contiguous split, so per-worker partial results can be
// merged in worker order for bit-reproducible reductions at a fixed pool size.
class ThreadPool {
public:
  explicit ThreadPool(int workers) : workers_(workers < 1 ? 1 : workers) {
    for (int w = 1; w < workers_; ++w)
      threads_.emplace_back([this, w] { worker_loop(w); });
  }

  ~ThreadPool() {
    {
      std::unique_lock<std::mutex> lk(mu_);
      stop_ = true;
      generation_++;
    }
    cv_start_.notify_all();
    for (auto& t : threads_) t.join();
  }

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  int workers() const { return workers_; }

  // fn(worker, begin, end) over [0, n) split into one contiguous chunk per
  // worker. Blocks until every chunk is done.
  void parallel_for(std::size_t n, const std::function<void(int, std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    if (workers_ == 1) {
      fn(0, 0, n);
      return;
    }
    {
      std::unique_lock<std::mutex> lk(mu_);
      job_ = &fn;
      job_n_ = n;
      pending_ = workers_ - 1;
      generation_++;
    }
    cv_start_.notify_all();
    run_chunk(fn, 0, n);
    std::unique_lock<std::mutex> lk(mu_);
    cv_done_.wait(lk, [this] { return pending_ == 0; });
    job_ = nullptr;
  }

private:
  void run_chunk(const std::function<void(int, std::size_t, std::size_t)>& fn, int w, std::size_t n) {
    std::size_t per = (n + workers_ - 1) / workers_;
    std::size_t begin = per * std::size_t(w);
    std::size_t end = std::min(n, begin + per);
    if (begin < end) fn(w, begin, end);
  }

  void worker_loop(int w) {
    uint64_t seen = 0;
    for (;;) {
      const std::function<void(int, std::size_t, std::size_t)>* job = nullptr;
      std::size_t n = 0;
      {
        std::unique_lock<std::mutex> lk(mu_);
        cv_start_.wait(lk, [&] { return generation_ != seen; });
        seen = generation_;
        if (stop_) return;
        job = job_;
        n = job_n_;
      }
      if (job) run_chunk(*job, w, n);
      {
        std::unique_lock<std::mutex> lk(mu_);
        if (--pending_ == 0) cv_done_.notify_all();
      }
    }
  }

  int workers_;
  std::vector<std::thread> threads_;
  std::mutex mu_;
  std::condition_variable cv_start_;
  std::condition_variable cv_done_;
  const std::function<void(int, std::size_t, std::size_t)>* job_ = nullptr;
  std::size_t job_n_ = 0;
  int pending_ = 0;
  uint64_t generation_ = 0;
  bool stop_ = false;
};

}  // namespace nerfgs
