#pragma once

#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace mfpa {

/// Fixed-size pool running blocked parallel loops.
///
/// Block boundaries depend only on the loop size and block length, never on
/// the worker count; callers write per-index outputs and reduce them in index
/// order, which keeps results independent of scheduling.
class WorkerPool {
 public:
  explicit WorkerPool(std::size_t workers = 1);
  ~WorkerPool();
  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  std::size_t workers() const { return threads_.size() + 1; }

  /// Calls body(begin, end) over [0, count) in blocks of `block` indices.
  /// The first exception thrown by any block is rethrown here.
  void parallel_for(std::size_t count, std::size_t block,
                    const std::function<void(std::size_t, std::size_t)>& body);

 private:
  void worker_loop();
  void drain();

  std::vector<std::thread> threads_;
  std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable done_;
  const std::function<void(std::size_t, std::size_t)>* body_ = nullptr;
  std::size_t count_ = 0;
  std::size_t block_ = 1;
  std::size_t next_ = 0;
  std::size_t active_ = 0;
  std::size_t generation_ = 0;
  bool stop_ = false;
  std::exception_ptr error_;
};

/// Runs inline when `pool` is null.
void parallel_for(WorkerPool* pool, std::size_t count, std::size_t block,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace mfpa
