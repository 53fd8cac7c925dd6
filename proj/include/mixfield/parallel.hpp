#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

namespace mixfield {

// Worker count resolution: explicit request wins, then the MIXFIELD_THREADS
// environment variable, then 1.
int resolve_threads(int requested);

// Runs fn(i) for every i in [0, count).  Iterations must be independent;
// whatever they write must not alias.  The first exception thrown by any
// iteration is rethrown on the calling thread.
template <typename Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
  threads = resolve_threads(threads);
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (!failed.load(std::memory_order_relaxed)) {
      std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::scoped_lock lock(error_mutex);
        if (!error) error = std::current_exception();
        failed.store(true);
      }
    }
  };
  std::vector<std::thread> pool;
  std::size_t nworkers = std::min(static_cast<std::size_t>(threads), count);
  pool.reserve(nworkers);
  for (std::size_t t = 0; t < nworkers; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

// Evaluates eval(i) -> std::optional<R> for every index and keeps the best
// result under the strict total order better(a, b) ("a beats b").  Because
// the order is total, the outcome does not depend on scheduling.
template <typename R, typename Eval, typename Better>
std::optional<R> parallel_best(std::size_t count, int threads, Eval&& eval,
                               Better&& better) {
  threads = resolve_threads(threads);
  std::vector<std::optional<R>> partial(
      std::max<std::size_t>(1, static_cast<std::size_t>(threads)));
  auto fold = [&better](std::optional<R>& acc, std::optional<R>&& cand) {
    if (!cand) return;
    if (!acc || better(*cand, *acc)) acc = std::move(cand);
  };
  if (threads <= 1 || count <= 1) {
    std::optional<R> best;
    for (std::size_t i = 0; i < count; ++i) fold(best, eval(i));
    return best;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::atomic<bool> failed{false};
  auto worker = [&](std::size_t slot) {
    while (!failed.load(std::memory_order_relaxed)) {
      std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fold(partial[slot], eval(i));
      } catch (...) {
        std::scoped_lock lock(error_mutex);
        if (!error) error = std::current_exception();
        failed.store(true);
      }
    }
  };
  std::vector<std::thread> pool;
  std::size_t nworkers = std::min<std::size_t>(threads, count);
  pool.reserve(nworkers);
  for (std::size_t t = 0; t < nworkers; ++t) pool.emplace_back(worker, t);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
  std::optional<R> best;
  for (auto& p : partial) fold(best, std::move(p));
  return best;
}

}  // namespace mixfield
