#pragma once

// Entropy controllers around the update pipeline. Entrocraft is the
// rejection-sampling filter: given the batch entropy's position relative to
// the target band, accept rollout i with probability min(1, exp(gamma * m *
// A_i)). The remaining kinds are the compared entropy-preserving baselines,
// expressed as hooks on advantage weights, clip limits, token masks, or an
// additive entropy-bonus gradient.

#include <cstdint>
#include <string>
#include <vector>

#include "entrosim/advantage.hpp"
#include "entrosim/rng.hpp"
#include "entrosim/schedule.hpp"
#include "entrosim/task.hpp"

namespace entrosim {

enum class ControllerKind {
  None,
  Entrocraft,
  EntropyLoss,
  ClipHigher,
  ClipCov,
  WReinforce,
  Entropic,
};

struct ControllerConfig {
  ControllerKind kind = ControllerKind::None;
  double gamma = 10.0;          // entrocraft acceptance temperature
  double beta = 0.01;           // entropy-loss bonus coefficient
  double eps_high = 0.28;       // clip-higher's raised upper clip
  double clip_fraction = 0.02;  // clip-cov's masked token fraction
  double lambda = 1.0;          // w-reinforce positive coefficient
  double alpha_gain = 1.0;      // entropic proportional gain
};

/// Entropy out-of-range indicator: +1 above the band, -1 below, 0 inside
/// (strict inequalities at both edges).
int out_of_range_indicator(double batch_entropy, const EntropyBand& band);

/// Applies the rejection filter to a group in place: accept rollout i iff
/// u <= exp(gamma * m * A_i). Returns the number accepted. Advantage values
/// are never altered, only the accepted flags.
int filter_group(Group& group, int m, double gamma, RngStream& stream);

/// Rollout indices that contribute to the gradient: accepted and included.
std::vector<int> gradient_scope(const Group& group);

/// W-Reinforce: correct rollouts weighted +lambda, incorrect ones -1.
void apply_w_reinforce(Group& group, double lambda);

/// EntroPIC-style coefficients: correct -> (1 + alpha), incorrect -> -(1 -
/// alpha) with alpha = clamp(gain * (target - batch_entropy), -0.9, 0.9).
double entropic_alpha(double gain, double target, double batch_entropy);
void apply_entropic(Group& group, double alpha);

std::string controller_kind_name(ControllerKind kind);

}  // namespace entrosim
