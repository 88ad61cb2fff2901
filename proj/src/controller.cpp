#include "entrosim/controller.hpp"

#include <algorithm>
#include <cmath>

namespace entrosim {

int out_of_range_indicator(double batch_entropy, const EntropyBand& band) {
  if (batch_entropy > band.high) return 1;
  if (batch_entropy < band.low) return -1;
  return 0;
}

int filter_group(Group& group, int m, double gamma, RngStream& stream) {
  int accepted = 0;
  for (Rollout& r : group.rollouts) {
    const double u = stream.next_double();
    r.accepted = u <= std::exp(gamma * static_cast<double>(m) * r.advantage);
    if (r.accepted) ++accepted;
  }
  return accepted;
}

std::vector<int> gradient_scope(const Group& group) {
  std::vector<int> scope;
  scope.reserve(group.rollouts.size());
  for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
    if (group.rollouts[i].accepted && group.rollouts[i].included) {
      scope.push_back(static_cast<int>(i));
    }
  }
  return scope;
}

void apply_w_reinforce(Group& group, double lambda) {
  for (Rollout& r : group.rollouts) {
    r.advantage = r.reward == 1.0 ? lambda : -1.0;
    r.included = true;
  }
}

double entropic_alpha(double gain, double target, double batch_entropy) {
  return std::clamp(gain * (target - batch_entropy), -0.9, 0.9);
}

void apply_entropic(Group& group, double alpha) {
  for (Rollout& r : group.rollouts) {
    r.advantage = r.reward == 1.0 ? 1.0 + alpha : -(1.0 - alpha);
    r.included = true;
  }
}

std::string controller_kind_name(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::None: return "none";
    case ControllerKind::Entrocraft: return "entrocraft";
    case ControllerKind::EntropyLoss: return "entropy-loss";
    case ControllerKind::ClipHigher: return "clip-higher";
    case ControllerKind::ClipCov: return "clip-cov";
    case ControllerKind::WReinforce: return "w-reinforce";
    case ControllerKind::Entropic: return "entropic";
  }
  return "?";
}

}  // namespace entrosim
