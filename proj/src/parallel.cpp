#include "parallel.hpp"

#include <algorithm>
#include <cstdlib>

namespace icl {
namespace {

int g_threads = 0;

int default_threads() {
  if (const char* env = std::getenv("ICL_LAB_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

}  // namespace

int thread_count() {
  if (g_threads <= 0) g_threads = default_threads();
  return g_threads;
}

void set_thread_count(int n) { g_threads = n > 0 ? n : 0; }

void for_each_chunk(std::size_t n_items, std::size_t chunk_size,
                    const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
  if (n_items == 0) return;
  const std::size_t n_chunks = (n_items + chunk_size - 1) / chunk_size;
  const int workers = std::min<std::size_t>(thread_count(), n_chunks);
  auto run_chunk = [&](std::size_t c) {
    const std::size_t begin = c * chunk_size;
    const std::size_t end = std::min(begin + chunk_size, n_items);
    fn(c, begin, end);
  };
  if (workers <= 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) run_chunk(c);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t c = next.fetch_add(1); c < n_chunks; c = next.fetch_add(1)) run_chunk(c);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace icl
