#include "entrosim/advantage.hpp"

#include <cmath>
#include <stdexcept>

namespace entrosim {

AdvantageVector estimate(EstimatorKind kind, const std::vector<double>& rewards) {
  const std::size_t g = rewards.size();
  if (kind == EstimatorKind::GroupNormalized && g < 2) {
    throw std::invalid_argument("group-normalized estimator needs G >= 2");
  }
  if (g == 0) throw std::invalid_argument("empty reward vector");

  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(g);

  AdvantageVector adv;
  adv.values.assign(g, 0.0);
  adv.included.assign(g, 1);
  adv.degenerate = true;
  for (double r : rewards) {
    if (r != rewards[0]) {
      adv.degenerate = false;
      break;
    }
  }

  switch (kind) {
    case EstimatorKind::GroupNormalized: {
      double var = 0.0;
      for (double r : rewards) var += (r - mean) * (r - mean);
      var /= static_cast<double>(g);  // population variance
      const double std_dev = std::sqrt(var);
      if (std_dev > 0.0) {
        for (std::size_t i = 0; i < g; ++i) adv.values[i] = (rewards[i] - mean) / std_dev;
      }
      break;
    }
    case EstimatorKind::PositiveOnly:
      for (std::size_t i = 0; i < g; ++i) {
        if (rewards[i] > mean) {
          adv.values[i] = rewards[i];
        } else {
          adv.included[i] = 0;
        }
      }
      break;
    case EstimatorKind::NegativeOnly:
      for (std::size_t i = 0; i < g; ++i) {
        if (rewards[i] < 1.0) {
          adv.values[i] = -(1.0 - rewards[i]);
        } else {
          adv.included[i] = 0;
        }
      }
      break;
  }
  return adv;
}

void assign_advantages(Group& group, const AdvantageVector& adv) {
  if (adv.values.size() != group.rollouts.size()) {
    throw std::invalid_argument("advantage vector length does not match group size");
  }
  for (std::size_t i = 0; i < adv.values.size(); ++i) {
    group.rollouts[i].advantage = adv.values[i];
    group.rollouts[i].included = adv.included[i] != 0;
  }
}

std::string estimator_name(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::GroupNormalized: return "group-normalized";
    case EstimatorKind::PositiveOnly: return "positive-only";
    case EstimatorKind::NegativeOnly: return "negative-only";
  }
  return "?";
}

}  // namespace entrosim
