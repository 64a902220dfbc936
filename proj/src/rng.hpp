#pragma once

#include <cstdint>

namespace icl {

// Counter-keyed random stream. The sequence is fully determined by
// (seed, stream id), independent of evaluation order or thread count,
// so every prompt can own its own stream.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();

  // Uniform on (0, 1].
  double uniform();

  // Standard normal via Box-Muller.
  double gaussian();

 private:
  std::uint64_t s_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Stream-id namespaces so one master seed can feed independent draws.
inline constexpr std::uint64_t kStreamHaar = 1ull << 56;
inline constexpr std::uint64_t kStreamInit = 2ull << 56;
inline constexpr std::uint64_t kStreamPrompt = 3ull << 56;
inline constexpr std::uint64_t kStreamMisc = 4ull << 56;

}  // namespace icl
