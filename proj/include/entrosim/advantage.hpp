#pragma once

// Group-relative advantage estimators: zero-mean (GRPO-style), positive-only
// (RAFT++-style) and negative-only (NSR-style).

#include <cstdint>
#include <string>
#include <vector>

#include "entrosim/task.hpp"

namespace entrosim {

enum class EstimatorKind { GroupNormalized, PositiveOnly, NegativeOnly };

struct AdvantageVector {
  std::vector<double> values;
  std::vector<std::uint8_t> included;  // 0 = masked out of the gradient
  bool degenerate = false;             // all rewards equal
};

/// Maps a group's rewards to per-rollout advantages.
///  - group-normalized: (r - mean) / population std; all zero when std = 0.
///  - positive-only: r where r > mean, others masked out.
///  - negative-only: -(1 - r) for incorrect rollouts, correct ones masked out.
AdvantageVector estimate(EstimatorKind kind, const std::vector<double>& rewards);

/// Copies advantages and masks onto the group's rollouts.
void assign_advantages(Group& group, const AdvantageVector& adv);

std::string estimator_name(EstimatorKind kind);

}  // namespace entrosim
