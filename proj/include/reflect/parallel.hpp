#pragma once

#include <atomic>
#include <condition_variable>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace reflect {

/// Runs work(0..n) with at most `parallelism` workers while invoking
/// commit(i) strictly in index order as completed prefixes become available.
/// Work items may run concurrently; commits never do. The first exception
/// (from work or commit) wins and cancels remaining work.
inline void ordered_parallel_for(std::size_t n, int parallelism,
                                 const std::function<void(std::size_t)>& work,
                                 const std::function<void(std::size_t)>& commit) {
  if (n == 0) return;
  if (parallelism <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      work(i);
      commit(i);
    }
    return;
  }

  std::mutex mutex;
  std::condition_variable ready;
  std::vector<char> done(n, 0);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> cancelled{false};

  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= n || cancelled.load()) return;
      try {
        work(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mutex);
        errors[i] = std::current_exception();
      }
      {
        std::lock_guard<std::mutex> lock(mutex);
        done[i] = 1;
      }
      ready.notify_all();
    }
  };

  std::vector<std::thread> threads;
  int worker_count = std::min<std::size_t>(static_cast<std::size_t>(parallelism), n);
  threads.reserve(static_cast<std::size_t>(worker_count));
  for (int t = 0; t < worker_count; ++t) threads.emplace_back(worker);

  std::exception_ptr first_error;
  {
    std::unique_lock<std::mutex> lock(mutex);
    for (std::size_t i = 0; i < n; ++i) {
      ready.wait(lock, [&] { return done[i] != 0; });
      if (errors[i]) {
        first_error = errors[i];
        cancelled.store(true);
        break;
      }
      lock.unlock();
      try {
        commit(i);
      } catch (...) {
        first_error = std::current_exception();
        cancelled.store(true);
        lock.lock();
        break;
      }
      lock.lock();
    }
  }

  for (auto& thread : threads) thread.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace reflect
