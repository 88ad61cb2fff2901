#pragma once

// Entropy bookkeeping and the theorem-verification primitives: exact
// sequence-entropy change across an update, its first-order prediction, and
// the output-space baseline that gates the advantage/entropy sign law.
//
// All entropies are in nats. Sequence entropy follows the teacher-forced
// convention: per-step next-token entropies under the learner, averaged over
// the steps of a sampled sequence.

#include <span>
#include <vector>

#include "entrosim/policy.hpp"

namespace entrosim {

/// -sum_i p_i log p_i with 0 log 0 := 0.
double token_entropy(std::span<const double> dist);

/// Mean of token_entropy over the per-step distributions. Throws on empty.
double sequence_entropy(const std::vector<std::vector<double>>& step_dists);

/// Per-step probability changes across an update, dist_after - dist_before.
struct ProbDelta {
  std::vector<std::vector<double>> steps;
};

ProbDelta prob_delta(const std::vector<std::vector<double>>& dists_before,
                     const std::vector<std::vector<double>>& dists_after);

/// H_after - H_before with contexts fixed at the original rollout tokens.
double exact_entropy_change(const PolicyParameters& params_before,
                            const PolicyParameters& params_after,
                            std::span<const int> prompt, std::span<const int> y);

/// First-order Taylor prediction: -(1/|y|) sum_t sum_i delta_p[t][i] log p[t][i].
double first_order_prediction(const ProbDelta& delta,
                              const std::vector<std::vector<double>>& dists_before);

/// The log-space threshold the sequence log-likelihood must exceed for the
/// sign law: -sum_t sum_{i != y_t} (dp[t][i] / dp[t][y_t]) log p[t][i].
/// Steps where |dp[t][y_t]| < kProbFloor are excluded; throws when every
/// step is excluded ("no informative steps").
double output_space_baseline(const ProbDelta& delta,
                             const std::vector<std::vector<double>>& dists_before,
                             std::span<const int> y);

/// Diagnostics for one single-rollout update.
struct UpdateReport {
  double delta_h_exact = 0.0;
  double delta_h_first_order = 0.0;
  double advantage = 0.0;
  double log_likelihood = 0.0;
  double output_space_baseline = 0.0;
  bool baseline_defined = false;  // false when every step was excluded
  bool condition_holds = false;   // log_likelihood >= output_space_baseline
  bool sign_agrees = false;       // advantage * delta_h_exact <= 0
};

/// Measures one update: teacher-forces (prompt, y) under both parameter
/// sets and fills every UpdateReport field.
UpdateReport analyze_update(const PolicyParameters& params_before,
                            const PolicyParameters& params_after,
                            std::span<const int> prompt, std::span<const int> y,
                            double advantage);

/// Exhaustive cross-check of the sampled-entropy measurement: the exact
/// expectation sum_y pi(y) H(y) over all |V|^length sequences. Only sensible
/// for tiny (length, |V|); throws when |V|^length exceeds 1e6.
double expected_sequence_entropy_exhaustive(const PolicyParameters& params,
                                            std::span<const int> prompt, int length);

}  // namespace entrosim
