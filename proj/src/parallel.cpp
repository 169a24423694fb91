#include "mfpa/parallel.hpp"

#include <algorithm>

namespace mfpa {

WorkerPool::WorkerPool(std::size_t workers) {
  const std::size_t extra = workers > 1 ? workers - 1 : 0;
  threads_.reserve(extra);
  for (std::size_t i = 0; i < extra; ++i) threads_.emplace_back([this] { worker_loop(); });
}

WorkerPool::~WorkerPool() {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    stop_ = true;
  }
  wake_.notify_all();
  for (auto& t : threads_) t.join();
}

void WorkerPool::drain() {
  for (;;) {
    std::size_t begin;
    {
      std::lock_guard<std::mutex> lock(mutex_);
      if (next_ >= count_) return;
      begin = next_;
      next_ += block_;
    }
    const std::size_t end = std::min(begin + block_, count_);
    try {
      (*body_)(begin, end);
    } catch (...) {
      std::lock_guard<std::mutex> lock(mutex_);
      if (!error_) error_ = std::current_exception();
      next_ = count_;
    }
  }
}

void WorkerPool::worker_loop() {
  std::size_t seen = 0;
  for (;;) {
    {
      std::unique_lock<std::mutex> lock(mutex_);
      wake_.wait(lock, [&] { return stop_ || generation_ != seen; });
      if (stop_) return;
      seen = generation_;
      ++active_;
    }
    drain();
    {
      std::lock_guard<std::mutex> lock(mutex_);
      --active_;
    }
    done_.notify_all();
  }
}

void WorkerPool::parallel_for(std::size_t count, std::size_t block,
                              const std::function<void(std::size_t, std::size_t)>& body) {
  if (count == 0) return;
  block = std::max<std::size_t>(block, 1);
  if (threads_.empty() || count <= block) {
    for (std::size_t b = 0; b < count; b += block) body(b, std::min(b + block, count));
    return;
  }
  {
    std::lock_guard<std::mutex> lock(mutex_);
    body_ = &body;
    count_ = count;
    block_ = block;
    next_ = 0;
    error_ = nullptr;
    ++generation_;
  }
  wake_.notify_all();
  drain();
  std::exception_ptr error;
  {
    std::unique_lock<std::mutex> lock(mutex_);
    done_.wait(lock, [&] { return active_ == 0 && next_ >= count_; });
    body_ = nullptr;
    error = error_;
  }
  if (error) std::rethrow_exception(error);
}

void parallel_for(WorkerPool* pool, std::size_t count, std::size_t block,
                  const std::function<void(std::size_t, std::size_t)>& body) {
  if (pool) {
    pool->parallel_for(count, block, body);
    return;
  }
  block = std::max<std::size_t>(block, 1);
  for (std::size_t b = 0; b < count; b += block) body(b, std::min(b + block, count));
}

}  // namespace mfpa
