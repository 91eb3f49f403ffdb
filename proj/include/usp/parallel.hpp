#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace usp {

//! Worker count used when a caller asks for 0 threads.
inline unsigned
default_threads()
{
  return std::max(1u, std::thread::hardware_concurrency());
}

//! Calls body(i) for i in [0, count) on up to `threads` workers. Work is
//! handed out by index, so callers that write results by index get output
//! that does not depend on the worker count. The first exception thrown by a
//! body is rethrown on the calling thread.
template<class Body>
void
parallel_for(std::size_t count, unsigned threads, const Body& body)
{
  if (threads == 0)
    threads = default_threads();
  threads = static_cast<unsigned>(
    std::min<std::size_t>(threads, std::max<std::size_t>(count, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i)
      body(i);
    return;
  }
  std::atomic<std::size_t> next{ 0 };
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count)
        return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error)
          error = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back(worker);
  pool.clear();
  if (error)
    std::rethrow_exception(error);
}

} // namespace usp
