#include "spectrack/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace spectrack::parallel {
namespace {

std::atomic<unsigned> g_threads{1};
thread_local bool t_in_worker = false;

constexpr std::size_t kReduceChunk = 256;

}  // namespace

void set_thread_count(unsigned count) { g_threads.store(std::max(1u, count)); }

unsigned thread_count() { return g_threads.load(); }

void for_ranges(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body) {
  if (n == 0) return;
  const std::size_t workers = std::min<std::size_t>(thread_count(), n);
  if (workers <= 1 || t_in_worker) {
    body(0, n);
    return;
  }

  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mutex;
  pool.reserve(workers);
  const std::size_t block = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * block;
    const std::size_t end = std::min(n, begin + block);
    if (begin >= end) break;
    pool.emplace_back([&, begin, end] {
      t_in_worker = true;
      try {
        body(begin, end);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
      t_in_worker = false;
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

double chunked_sum(std::size_t n, const std::function<double(std::size_t)>& term) {
  const std::size_t chunks = (n + kReduceChunk - 1) / kReduceChunk;
  std::vector<double> partial(chunks, 0.0);
  for_ranges(chunks, [&](std::size_t c0, std::size_t c1) {
    for (std::size_t c = c0; c < c1; ++c) {
      const std::size_t end = std::min(n, (c + 1) * kReduceChunk);
      double s = 0.0;
      for (std::size_t i = c * kReduceChunk; i < end; ++i) s += term(i);
      partial[c] = s;
    }
  });
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

}  // namespace spectrack::parallel
