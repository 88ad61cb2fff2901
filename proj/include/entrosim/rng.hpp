#pragma once

// Counter-based random streams. Every consumer (a rollout, a filter draw, a
// trial) derives its own stream from (seed, use, indices), so results never
// depend on thread scheduling or on how many draws a sibling consumed.

#include <cstdint>
#include <cmath>

namespace entrosim {

// Stream purposes; folded into the key so streams cannot collide.
enum class StreamUse : std::uint64_t {
  ParamInit = 1,
  Prompt = 2,
  Rollout = 3,
  Filter = 4,
  EvalPrompt = 5,
  EvalSample = 6,
  TrialInit = 7,
  TrialPrompt = 8,
  TrialRollout = 9,
};

namespace detail {

// SplitMix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Derives a stream key by absorbing (seed, use, a, b, c) through the mixer.
inline std::uint64_t derive_key(std::uint64_t seed, StreamUse use,
                                std::uint64_t a = 0, std::uint64_t b = 0,
                                std::uint64_t c = 0) {
  std::uint64_t k = detail::mix64(seed);
  k = detail::mix64(k ^ static_cast<std::uint64_t>(use));
  k = detail::mix64(k ^ a);
  k = detail::mix64(k ^ b);
  k = detail::mix64(k ^ c);
  return k;
}

/// Counter-based generator: the state is a counter, every output is a hash
/// of it (SplitMix64). Cheap to construct, trivially reproducible.
class RngStream {
 public:
  explicit RngStream(std::uint64_t key) : state_(key) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). n must be > 0.
  std::uint32_t next_below(std::uint32_t n) {
    return static_cast<std::uint32_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  /// Standard normal via Box-Muller; consumes two uniforms per call.
  double next_gaussian() {
    double u1 = 1.0 - next_double();  // (0, 1]
    double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

 private:
  std::uint64_t state_;
};

}  // namespace entrosim
