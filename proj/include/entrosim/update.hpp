#pragma once

// Per-step policy-gradient assembly: the clipped token-level surrogate, its
// sequence-ratio variant, plain policy gradient, an optional KL penalty
// against a reference snapshot, and the controller hooks that modify them
// (entropy bonus, clip-cov token masking, raised upper clip).
//
// The batch gradient is a mean over groups; each group sums over its
// accepted-and-included rollouts with 1/|S_x| normalization. Empty scopes
// contribute zero and are counted as skipped.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "entrosim/controller.hpp"
#include "entrosim/policy.hpp"
#include "entrosim/task.hpp"

namespace entrosim {

enum class ObjectiveKind { PlainPG, GrpoClipped, GspoClipped };

struct UpdateConfig {
  ObjectiveKind objective = ObjectiveKind::GrpoClipped;
  double eps_low = 0.2;
  double eps_high = 0.2;
  double lr = 1e-3;
  double kl_coef = 1e-3;
  bool length_norm = false;  // divide each sequence's token sum by |y|
};

/// Per-token probability ratios pi_learner(y_t) / pi_sampler(y_t). Sampler
/// probabilities come from the rollout's stored step_dists; values below the
/// probability floor are floored and counted.
struct RatioResult {
  std::vector<double> ratios;
  long floored = 0;
};
RatioResult importance_ratios(const PolicyParameters& learner, const Prompt& prompt,
                              const Rollout& rollout);

/// Length-normalized sequence-level ratio
/// exp((log pi_learner(y) - log pi_sampler(y)) / |y|).
double gspo_ratio(const PolicyParameters& learner, const Prompt& prompt,
                  const Rollout& rollout);

struct BatchGradient {
  std::vector<double> gradient;  // surrogate (+ entropy bonus) - kl penalty
  double mean_ratio = 0.0;
  double clip_fraction = 0.0;
  double kl_value = 0.0;
  double grad_norm = 0.0;
  long floored_ratios = 0;
  long tokens = 0;
  int skipped_groups = 0;
};

/// Assembles the full batch gradient over groups. `kl_reference` enables the
/// KL penalty when kl_coef > 0. Group pieces are computed in parallel and
/// reduced in group order, so the result is independent of thread count.
BatchGradient compute_batch_gradient(const UpdateConfig& config,
                                     const ControllerConfig& controller,
                                     const PolicyParameters& learner,
                                     const PolicyParameters* kl_reference,
                                     const std::vector<Group>& groups, int threads);

/// params + lr * gradient, with diagnostics checked finite first.
PolicyParameters compose_and_apply(const PolicyParameters& params, const BatchGradient& batch,
                                   double lr);

std::string objective_name(ObjectiveKind kind);

}  // namespace entrosim
