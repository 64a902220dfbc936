#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace icl {

int thread_count();
void set_thread_count(int n);

// Runs fn(chunk_index, begin, end) for every fixed-size chunk of [0, n_items).
// Chunk boundaries do not depend on the worker count, so a caller that
// accumulates per-chunk results and combines them with combine_tree below
// gets bit-identical output for any thread count.
void for_each_chunk(std::size_t n_items, std::size_t chunk_size,
                    const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

// Pairwise tree reduction with a shape fixed by the element count only.
// combine(dst, src) must fold src into dst.
template <typename T, typename Combine>
T combine_tree(std::vector<T>& parts, Combine combine) {
  std::size_t n = parts.size();
  while (n > 1) {
    const std::size_t half = n / 2;
    for (std::size_t i = 0; i < half; ++i) combine(parts[i], parts[half + i]);
    if (n % 2 == 1) parts[half] = std::move(parts[n - 1]);
    n = half + n % 2;
  }
  return std::move(parts[0]);
}

inline constexpr std::size_t kDefaultChunk = 1024;

}  // namespace icl
