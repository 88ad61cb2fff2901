#include "entrosim/entropy.hpp"

#include <cmath>
#include <stdexcept>

namespace entrosim {

double token_entropy(std::span<const double> dist) {
  double h = 0.0;
  for (double p : dist) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

double sequence_entropy(const std::vector<std::vector<double>>& step_dists) {
  if (step_dists.empty()) throw std::invalid_argument("sequence_entropy on empty sequence");
  double total = 0.0;
  for (const auto& dist : step_dists) total += token_entropy(dist);
  return total / static_cast<double>(step_dists.size());
}

ProbDelta prob_delta(const std::vector<std::vector<double>>& dists_before,
                     const std::vector<std::vector<double>>& dists_after) {
  if (dists_before.size() != dists_after.size()) {
    throw std::invalid_argument("prob_delta: step count mismatch");
  }
  ProbDelta delta;
  delta.steps.resize(dists_before.size());
  for (std::size_t t = 0; t < dists_before.size(); ++t) {
    const auto& before = dists_before[t];
    const auto& after = dists_after[t];
    if (before.size() != after.size()) throw std::invalid_argument("prob_delta: vocab mismatch");
    delta.steps[t].resize(before.size());
    for (std::size_t i = 0; i < before.size(); ++i) {
      delta.steps[t][i] = after[i] - before[i];
    }
  }
  return delta;
}

double exact_entropy_change(const PolicyParameters& params_before,
                            const PolicyParameters& params_after,
                            std::span<const int> prompt, std::span<const int> y) {
  const auto before = teacher_forced_dists(params_before, prompt, y);
  const auto after = teacher_forced_dists(params_after, prompt, y);
  return sequence_entropy(after) - sequence_entropy(before);
}

double first_order_prediction(const ProbDelta& delta,
                              const std::vector<std::vector<double>>& dists_before) {
  if (delta.steps.size() != dists_before.size()) {
    throw std::invalid_argument("first_order_prediction: step count mismatch");
  }
  if (delta.steps.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t t = 0; t < delta.steps.size(); ++t) {
    for (std::size_t i = 0; i < delta.steps[t].size(); ++i) {
      total += delta.steps[t][i] * floored_log(dists_before[t][i]);
    }
  }
  return -total / static_cast<double>(delta.steps.size());
}

double output_space_baseline(const ProbDelta& delta,
                             const std::vector<std::vector<double>>& dists_before,
                             std::span<const int> y) {
  if (delta.steps.size() != y.size() || dists_before.size() != y.size()) {
    throw std::invalid_argument("output_space_baseline: length mismatch");
  }
  double baseline = 0.0;
  std::size_t informative = 0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    const double dp_y = delta.steps[t][y[t]];
    if (std::abs(dp_y) < kProbFloor) continue;  // ratio undefined, no first-order change via y_t
    ++informative;
    for (std::size_t i = 0; i < delta.steps[t].size(); ++i) {
      if (static_cast<int>(i) == y[t]) continue;
      baseline -= delta.steps[t][i] / dp_y * floored_log(dists_before[t][i]);
    }
  }
  if (informative == 0) throw std::invalid_argument("output_space_baseline: no informative steps");
  return baseline;
}

UpdateReport analyze_update(const PolicyParameters& params_before,
                            const PolicyParameters& params_after,
                            std::span<const int> prompt, std::span<const int> y,
                            double advantage) {
  const auto before = teacher_forced_dists(params_before, prompt, y);
  const auto after = teacher_forced_dists(params_after, prompt, y);
  const ProbDelta delta = prob_delta(before, after);

  UpdateReport report;
  report.advantage = advantage;
  report.delta_h_exact = sequence_entropy(after) - sequence_entropy(before);
  report.delta_h_first_order = first_order_prediction(delta, before);

  double ll = 0.0;
  for (std::size_t t = 0; t < y.size(); ++t) ll += floored_log(before[t][y[t]]);
  report.log_likelihood = ll;

  try {
    report.output_space_baseline = output_space_baseline(delta, before, y);
    report.baseline_defined = true;
    report.condition_holds = report.log_likelihood >= report.output_space_baseline;
  } catch (const std::invalid_argument&) {
    report.baseline_defined = false;
    report.condition_holds = false;
  }
  report.sign_agrees = advantage * report.delta_h_exact <= 0.0;
  return report;
}

namespace {

double enumerate_entropy(const PolicyParameters& params, std::span<const int> prompt,
                         std::vector<int>& prefix, int remaining, double prob,
                         double entropy_sum) {
  const Context ctx{prompt, std::span<const int>(prefix)};
  const std::vector<double> dist = forward_dist(params, ctx);
  const double step_h = token_entropy(dist);

  double total = 0.0;
  for (int tok = 0; tok < params.vocab.size; ++tok) {
    const double p = prob * dist[tok];
    if (p == 0.0) continue;
    const double h_sum = entropy_sum + step_h;
    const int len = static_cast<int>(prefix.size()) + 1;
    if (tok == params.vocab.eos || remaining == 1) {
      total += p * (h_sum / static_cast<double>(len));
    } else {
      prefix.push_back(tok);
      total += enumerate_entropy(params, prompt, prefix, remaining - 1, p, h_sum);
      prefix.pop_back();
    }
  }
  return total;
}

}  // namespace

double expected_sequence_entropy_exhaustive(const PolicyParameters& params,
                                            std::span<const int> prompt, int length) {
  if (length < 1) throw std::invalid_argument("length must be >= 1");
  double states = 1.0;
  for (int i = 0; i < length; ++i) states *= params.vocab.size;
  if (states > 1e6) throw std::invalid_argument("exhaustive enumeration too large");
  std::vector<int> prefix;
  return enumerate_entropy(params, prompt, prefix, length, 1.0, 0.0);
}

}  // namespace entrosim
