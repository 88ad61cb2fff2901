#pragma once

// Synthetic verifiable tasks: prompts with a unique ground-truth completion
// and a total 0/1 verifier, plus grouped rollout generation from a sampler
// policy.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "entrosim/policy.hpp"
#include "entrosim/rng.hpp"
#include "entrosim/vocab.hpp"

namespace entrosim {

enum class TaskKind { ModularSum, Parity };

struct TaskSpec {
  TaskKind kind = TaskKind::ModularSum;
  int operand_count = 2;  // modular-sum
  int bit_count = 3;      // parity
  int answer_length = 1;  // answer tokens before end-of-sequence

  void validate(const Vocabulary& vocab) const;
};

struct Prompt {
  std::vector<int> tokens;
  std::vector<int> ground_truth;  // answer tokens followed by eos
};

/// One sampled completion with its teacher-forced bookkeeping.
struct Rollout {
  int prompt_index = 0;
  std::vector<int> y;
  std::vector<std::vector<double>> step_dists;  // learner-temperature (T=1) dists
  double log_likelihood = 0.0;
  double reward = 0.0;
  double advantage = 0.0;   // filled by the estimator
  bool included = true;     // estimator-level mask
  bool accepted = true;     // controller-level filter flag
};

struct Group {
  Prompt prompt;
  std::vector<Rollout> rollouts;
  bool degenerate = false;  // all rewards equal
};

/// Samples a prompt whose answer tokens never collide with eos, so the
/// verifier's prefix-before-eos comparison stays unambiguous.
Prompt generate_prompt(const TaskSpec& task, const Vocabulary& vocab, RngStream& stream);

/// 1 iff the completion's tokens before the first eos equal the ground
/// truth's. Pure function of (prompt, completion).
double verify(const Prompt& prompt, std::span<const int> completion, const Vocabulary& vocab);

/// Samples G completions autoregressively at the given temperature.
/// step_dists are stored at temperature 1. Per-rollout streams are derived
/// from stream_key and the rollout index, so groups can run concurrently.
Group rollout_group(const PolicyParameters& sampler, const Prompt& prompt, int group_size,
                    int max_len, double temperature, std::uint64_t stream_key);

std::string task_kind_name(TaskKind kind);

}  // namespace entrosim
