// Copyright 2026 The maco Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <barrier>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace maco {

// Fixed set of worker threads that execute index ranges in lock step with
// the calling thread. Each parallel_for is a full synchronization point.
class WorkerPool {
 public:
  explicit WorkerPool(std::size_t threads)
      : size_(threads == 0 ? 1 : threads), start_(static_cast<std::ptrdiff_t>(size_)),
        done_(static_cast<std::ptrdiff_t>(size_)) {
    for (std::size_t t = 1; t < size_; ++t) {
      workers_.emplace_back([this, t] { worker_loop(t); });
    }
  }

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  ~WorkerPool() {
    if (size_ > 1) {
      stop_ = true;
      start_.arrive_and_wait();
    }
  }

  std::size_t size() const { return size_; }

  // Calls fn(k) for k in [0, count), split into contiguous chunks per thread.
  template <typename Fn>
  void parallel_for(std::size_t count, Fn&& fn) {
    if (size_ == 1 || count < 2) {
      for (std::size_t k = 0; k < count; ++k) fn(k);
      return;
    }
    count_ = count;
    task_ = [&fn](std::size_t k) { fn(k); };
    start_.arrive_and_wait();
    run_chunk(0);
    done_.arrive_and_wait();
    task_ = nullptr;
  }

 private:
  void run_chunk(std::size_t t) {
    const std::size_t lo = count_ * t / size_;
    const std::size_t hi = count_ * (t + 1) / size_;
    for (std::size_t k = lo; k < hi; ++k) task_(k);
  }

  void worker_loop(std::size_t t) {
    for (;;) {
      start_.arrive_and_wait();
      if (stop_) return;
      run_chunk(t);
      done_.arrive_and_wait();
    }
  }

  std::size_t size_;
  std::barrier<> start_;
  std::barrier<> done_;
  std::function<void(std::size_t)> task_;
  std::size_t count_ = 0;
  bool stop_ = false;
  std::vector<std::jthread> workers_;
};

}  // namespace maco
