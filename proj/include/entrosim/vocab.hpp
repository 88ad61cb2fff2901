#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace entrosim {

// Probabilities below this are floored before taking logs, keeping every
// per-token log finite.
inline constexpr double kProbFloor = 1e-12;

inline double floored_log(double p) {
  return std::log(p < kProbFloor ? kProbFloor : p);
}

struct Vocabulary {
  int size = 16;
  int eos = 15;  // reserved end-of-sequence token id

  double max_entropy() const { return std::log(static_cast<double>(size)); }

  void validate() const {
    if (size < 2) throw std::invalid_argument("vocabulary size must be >= 2");
    if (eos < 0 || eos >= size) throw std::invalid_argument("eos id out of vocabulary");
  }
};

/// One autoregressive position: the prompt plus the generated prefix y_<t.
/// Non-owning; callers keep the token buffers alive for the call.
struct Context {
  std::span<const int> prompt;
  std::span<const int> generated;

  std::size_t length() const { return prompt.size() + generated.size(); }
};

inline void check_tokens(std::span<const int> tokens, const Vocabulary& vocab) {
  for (int t : tokens) {
    if (t < 0 || t >= vocab.size) throw std::invalid_argument("token id out of vocabulary");
  }
}

}  // namespace entrosim
