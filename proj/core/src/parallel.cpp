#include "lyanet/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace lyanet {

std::size_t resolve_workers(std::size_t requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

void parallel_chunks(std::size_t count, std::size_t chunks, std::size_t workers,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
  if (count == 0) return;
  chunks = std::clamp<std::size_t>(chunks, 1, count);
  auto range = [&](std::size_t c) {
    return std::pair{c * count / chunks, (c + 1) * count / chunks};
  };
  workers = std::min(resolve_workers(workers), chunks);
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) {
      const auto [begin, end] = range(c);
      fn(c, begin, end);
    }
    return;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= chunks) return;
      try {
        const auto [begin, end] = range(c);
        fn(c, begin, end);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace lyanet
