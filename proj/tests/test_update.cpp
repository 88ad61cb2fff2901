#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "entrosim/entropy.hpp"
#include "entrosim/task.hpp"
#include "entrosim/update.hpp"
#include "oracles.hpp"

using namespace entrosim;

namespace {

const Vocabulary kVocab3{3, 2};

PolicyParameters tiny_policy(std::uint64_t seed, double scale) {
  PolicyParameters params = make_tabular_policy(kVocab3, 1);
  RngStream stream(seed);
  init_gaussian(params, scale, stream);
  return params;
}

std::vector<Group> sample_groups(const PolicyParameters& sampler, int n_groups, int g,
                                 std::uint64_t seed, EstimatorKind kind) {
  TaskSpec task;
  task.kind = TaskKind::ModularSum;
  std::vector<Group> groups;
  for (int i = 0; i < n_groups; ++i) {
    RngStream prompt_stream(derive_key(seed, StreamUse::Prompt, i));
    const Prompt prompt = generate_prompt(task, sampler.vocab, prompt_stream);
    Group group =
        rollout_group(sampler, prompt, g, 4, 1.0, derive_key(seed, StreamUse::Rollout, i));
    std::vector<double> rewards;
    for (const Rollout& r : group.rollouts) rewards.push_back(r.reward);
    assign_advantages(group, estimate(kind, rewards));
    groups.push_back(std::move(group));
  }
  return groups;
}

// Scalar value of the clipped surrogate, recomputed from scratch; the
// independent oracle differentiated by finite differences.
double surrogate_value(const UpdateConfig& config, const std::vector<double>& theta,
                       const PolicyParameters& shape, const std::vector<Group>& groups,
                       double eps_high_override = -1.0) {
  PolicyParameters learner = shape;
  learner.values = theta;
  const double eps_high = eps_high_override > 0 ? eps_high_override : config.eps_high;

  double total = 0.0;
  for (const Group& group : groups) {
    const std::vector<int> scope = gradient_scope(group);
    if (scope.empty()) continue;
    double group_sum = 0.0;
    for (int idx : scope) {
      const Rollout& r = group.rollouts[idx];
      double seq_sum = 0.0;
      double seq_ratio = 1.0;
      if (config.objective == ObjectiveKind::GspoClipped) {
        seq_ratio = gspo_ratio(learner, group.prompt, r);
      }
      for (std::size_t t = 0; t < r.y.size(); ++t) {
        const Context ctx{group.prompt.tokens,
                          std::span<const int>(r.y).subspan(0, t)};
        const auto p = forward_dist(learner, ctx);
        switch (config.objective) {
          case ObjectiveKind::PlainPG:
            seq_sum += r.advantage * std::log(std::max(p[r.y[t]], 1e-12));
            break;
          case ObjectiveKind::GrpoClipped: {
            const double ratio = p[r.y[t]] / std::max(r.step_dists[t][r.y[t]], 1e-12);
            const double clipped =
                std::clamp(ratio, 1.0 - config.eps_low, 1.0 + eps_high);
            seq_sum += std::min(ratio * r.advantage, clipped * r.advantage);
            break;
          }
          case ObjectiveKind::GspoClipped: {
            const double clipped =
                std::clamp(seq_ratio, 1.0 - config.eps_low, 1.0 + eps_high);
            seq_sum += std::min(seq_ratio * r.advantage, clipped * r.advantage);
            break;
          }
        }
      }
      if (config.length_norm) seq_sum /= static_cast<double>(r.y.size());
      group_sum += seq_sum;
    }
    total += group_sum / static_cast<double>(scope.size());
  }
  return total / static_cast<double>(groups.size());
}

}  // namespace

TEST_CASE("importance ratios are 1 on-policy and follow probabilities off-policy") {
  const PolicyParameters sampler = tiny_policy(1, 0.5);
  const auto groups = sample_groups(sampler, 1, 4, 10, EstimatorKind::GroupNormalized);
  for (const Rollout& r : groups[0].rollouts) {
    const RatioResult on_policy = importance_ratios(sampler, groups[0].prompt, r);
    for (double ratio : on_policy.ratios) CHECK(ratio == doctest::Approx(1.0).epsilon(1e-12));
  }

  const PolicyParameters learner = tiny_policy(2, 0.8);
  for (const Rollout& r : groups[0].rollouts) {
    const RatioResult off = importance_ratios(learner, groups[0].prompt, r);
    const double learner_ll = sequence_log_likelihood(learner, groups[0].prompt.tokens, r.y);
    double log_ratio_sum = 0.0;
    for (double ratio : off.ratios) log_ratio_sum += std::log(ratio);
    // Log-space oracle: sum of per-token log ratios equals the ll difference.
    CHECK(log_ratio_sum ==
          doctest::Approx(learner_ll - r.log_likelihood).epsilon(1e-12));
  }
}

TEST_CASE("a hand ratio: learner 0.2 vs sampler 0.1 is 2.0") {
  PolicyParameters learner = make_tabular_policy(kVocab3, 1);
  Rollout r;
  r.y = {0};
  r.step_dists = {{0.1, 0.5, 0.4}};
  r.log_likelihood = std::log(0.1);
  // Learner logits chosen so p(token 0) = 0.2 at the empty-window row:
  // softmax(a, 0, 0)[0] = e^a / (e^a + 2) = 0.2 gives e^a = 0.5.
  Prompt prompt;  // empty prompt: row 0
  learner.values[0] = std::log(0.5);
  const auto probs = forward_dist(learner, Context{{}, {}});
  // Verify the construction before using it.
  REQUIRE(probs[0] == doctest::Approx(0.2).epsilon(1e-9));
  const RatioResult result = importance_ratios(learner, prompt, r);
  CHECK(result.ratios[0] == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("gspo ratio identities") {
  const PolicyParameters sampler = tiny_policy(3, 0.4);
  const auto groups = sample_groups(sampler, 1, 3, 22, EstimatorKind::GroupNormalized);
  for (const Rollout& r : groups[0].rollouts) {
    CHECK(gspo_ratio(sampler, groups[0].prompt, r) == doctest::Approx(1.0).epsilon(1e-12));
  }

  // All per-token ratios equal c: the sequence ratio is c.
  const Vocabulary vocab16{16, 15};
  PolicyParameters uniform = make_tabular_policy(vocab16, 2);
  const Prompt prompt{{1, 2}, {3, 15}};
  Rollout r;
  r.y = {3, 7};
  r.step_dists = {std::vector<double>(16, 1.0 / 16), std::vector<double>(16, 1.0 / 16)};
  r.log_likelihood = 2.0 * std::log(1.0 / 16);
  PolicyParameters learner = uniform;
  const double bump = 0.8;
  for (std::size_t t = 0; t < r.y.size(); ++t) {
    const Context ctx{prompt.tokens, std::span<const int>(r.y).subspan(0, t)};
    learner.values[tabular_row_index(learner, ctx) * 16 + r.y[t]] += bump;
  }
  const double c = 16.0 * std::exp(bump) / (std::exp(bump) + 15.0);
  CHECK(gspo_ratio(learner, prompt, r) == doctest::Approx(c).epsilon(1e-9));

  // Product-then-root oracle on a random off-policy pair.
  const PolicyParameters other = tiny_policy(6, 0.9);
  const auto g2 = sample_groups(tiny_policy(7, 0.5), 1, 2, 31, EstimatorKind::GroupNormalized);
  for (const Rollout& rr : g2[0].rollouts) {
    const RatioResult ratios = importance_ratios(other, g2[0].prompt, rr);
    double product = 1.0;
    for (double x : ratios.ratios) product *= x;
    const double expected = std::pow(product, 1.0 / static_cast<double>(ratios.ratios.size()));
    CHECK(gspo_ratio(other, g2[0].prompt, rr) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("on-policy clipped gradient equals the plain policy gradient") {
  const PolicyParameters sampler = tiny_policy(8, 0.6);
  auto groups = sample_groups(sampler, 3, 4, 40, EstimatorKind::GroupNormalized);

  UpdateConfig clipped;
  clipped.objective = ObjectiveKind::GrpoClipped;
  clipped.kl_coef = 0.0;
  UpdateConfig plain = clipped;
  plain.objective = ObjectiveKind::PlainPG;

  const ControllerConfig none;
  const BatchGradient a = compute_batch_gradient(clipped, none, sampler, nullptr, groups, 1);
  const BatchGradient b = compute_batch_gradient(plain, none, sampler, nullptr, groups, 1);
  REQUIRE(a.gradient.size() == b.gradient.size());
  for (std::size_t i = 0; i < a.gradient.size(); ++i) {
    CHECK(a.gradient[i] == doctest::Approx(b.gradient[i]).epsilon(1e-12));
  }
  CHECK(a.clip_fraction == 0.0);
  CHECK(a.mean_ratio == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("clipped-out tokens contribute no gradient") {
  // Single-token rollout with positive advantage and ratio above 1+eps_high.
  PolicyParameters learner = make_tabular_policy(kVocab3, 1);
  Group group;
  group.prompt = Prompt{{}, {0, 2}};
  Rollout r;
  r.y = {0};
  r.step_dists = {{0.2, 0.4, 0.4}};  // sampler prob 0.2; learner uniform 1/3 -> ratio 1.67
  r.log_likelihood = std::log(0.2);
  r.advantage = 1.0;
  group.rollouts.push_back(r);

  UpdateConfig config;
  config.objective = ObjectiveKind::GrpoClipped;
  config.kl_coef = 0.0;
  const BatchGradient batch =
      compute_batch_gradient(config, ControllerConfig{}, learner, nullptr, {group}, 1);
  CHECK(batch.clip_fraction == 1.0);
  for (double g : batch.gradient) CHECK(g == 0.0);
}

TEST_CASE("every objective variant passes finite-difference checks") {
  for (ObjectiveKind objective :
       {ObjectiveKind::PlainPG, ObjectiveKind::GrpoClipped, ObjectiveKind::GspoClipped}) {
    for (bool length_norm : {false, true}) {
      const PolicyParameters sampler = tiny_policy(50, 0.5);
      // Off-policy learner so ratios and clip branches are exercised.
      const PolicyParameters learner = tiny_policy(51, 0.5);
      auto groups = sample_groups(sampler, 2, 2, 52, EstimatorKind::GroupNormalized);

      UpdateConfig config;
      config.objective = objective;
      config.length_norm = length_norm;
      config.kl_coef = 0.0;
      config.eps_low = 0.35;
      config.eps_high = 0.35;

      // Keep the check away from clip boundaries: verify no token ratio sits
      // within 1e-3 of the clip edges for this seeded instance.
      for (const Group& group : groups) {
        for (const Rollout& r : group.rollouts) {
          const RatioResult ratios = importance_ratios(learner, group.prompt, r);
          for (double ratio : ratios.ratios) {
            REQUIRE(std::abs(ratio - (1.0 - config.eps_low)) > 1e-3);
            REQUIRE(std::abs(ratio - (1.0 + config.eps_high)) > 1e-3);
          }
          const double seq = gspo_ratio(learner, group.prompt, r);
          REQUIRE(std::abs(seq - (1.0 - config.eps_low)) > 1e-3);
          REQUIRE(std::abs(seq - (1.0 + config.eps_high)) > 1e-3);
        }
      }

      const BatchGradient batch =
          compute_batch_gradient(config, ControllerConfig{}, learner, nullptr, groups, 1);
      auto objective_fn = [&](const std::vector<double>& theta) {
        return surrogate_value(config, theta, learner, groups);
      };
      const auto fd = oracles::fd_gradient(objective_fn, learner.values, 1e-5);
      for (std::size_t i = 0; i < fd.size(); ++i) {
        const double scale = std::max({1.0, std::abs(fd[i]), std::abs(batch.gradient[i])});
        CHECK(std::abs(batch.gradient[i] - fd[i]) <= 1e-4 * scale);
      }
    }
  }
}

TEST_CASE("entropy bonus gradient matches finite differences of the bonus") {
  const PolicyParameters sampler = tiny_policy(60, 0.7);
  auto groups = sample_groups(sampler, 2, 2, 61, EstimatorKind::GroupNormalized);
  // Zero out advantages so only the bonus term remains.
  for (Group& group : groups) {
    for (Rollout& r : group.rollouts) r.advantage = 0.0;
  }

  UpdateConfig config;
  config.kl_coef = 0.0;
  ControllerConfig controller;
  controller.kind = ControllerKind::EntropyLoss;
  controller.beta = 0.37;

  const BatchGradient batch =
      compute_batch_gradient(config, controller, sampler, nullptr, groups, 1);

  auto bonus = [&](const std::vector<double>& theta) {
    PolicyParameters learner = sampler;
    learner.values = theta;
    double total = 0.0;
    long tokens = 0;
    for (const Group& group : groups) {
      for (int idx : gradient_scope(group)) {
        const Rollout& r = group.rollouts[idx];
        for (std::size_t t = 0; t < r.y.size(); ++t) {
          const Context ctx{group.prompt.tokens,
                            std::span<const int>(r.y).subspan(0, t)};
          total += token_entropy(forward_dist(learner, ctx));
          ++tokens;
        }
      }
    }
    return controller.beta * total / static_cast<double>(tokens);
  };
  const auto fd = oracles::fd_gradient(bonus, sampler.values, 1e-5);
  for (std::size_t i = 0; i < fd.size(); ++i) {
    CHECK(std::abs(batch.gradient[i] - fd[i]) <= 1e-4 * std::max(1.0, std::abs(fd[i])));
  }
}

TEST_CASE("kl penalty: zero at the reference, closed form for a Bernoulli row") {
  const PolicyParameters reference = tiny_policy(70, 0.5);
  auto groups = sample_groups(reference, 1, 2, 71, EstimatorKind::GroupNormalized);
  for (Group& group : groups) {
    for (Rollout& r : group.rollouts) r.advantage = 0.0;
  }

  UpdateConfig config;
  config.kl_coef = 1.0;
  SUBCASE("learner equals reference: zero gradient and zero value") {
    const BatchGradient batch =
        compute_batch_gradient(config, ControllerConfig{}, reference, &reference, groups, 1);
    for (double g : batch.gradient) CHECK(std::abs(g) <= 1e-15);
    CHECK(batch.kl_value <= 1e-15);
  }
  SUBCASE("kl_coef = 0 contributes nothing") {
    config.kl_coef = 0.0;
    const PolicyParameters learner = tiny_policy(72, 0.5);
    const BatchGradient batch =
        compute_batch_gradient(config, ControllerConfig{}, learner, &reference, groups, 1);
    // Advantages are zero, so any nonzero entry would come from the penalty.
    for (double g : batch.gradient) CHECK(g == 0.0);
  }
  SUBCASE("Bernoulli closed form") {
    const Vocabulary vocab2{2, 1};
    PolicyParameters learner = make_tabular_policy(vocab2, 1);
    PolicyParameters ref = make_tabular_policy(vocab2, 1);
    // Single empty-window row: logits (0.4, 0) vs (-0.3, 0).
    learner.values[0] = 0.4;
    ref.values[0] = -0.3;

    Group group;
    group.prompt = Prompt{{}, {0, 1}};
    Rollout r;
    r.y = {0};
    r.step_dists = {{0.5, 0.5}};
    r.log_likelihood = std::log(0.5);
    r.advantage = 0.0;
    group.rollouts.push_back(r);

    const BatchGradient batch =
        compute_batch_gradient(config, ControllerConfig{}, learner, &ref, {group}, 1);

    auto sigmoid = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
    const double p0 = sigmoid(0.4), q0 = sigmoid(-0.3);
    const double kl =
        p0 * std::log(p0 / q0) + (1 - p0) * std::log((1 - p0) / (1 - q0));
    const double dkl_dz0 = p0 * (std::log(p0 / q0) - kl);
    const double dkl_dz1 = (1 - p0) * (std::log((1 - p0) / (1 - q0)) - kl);
    CHECK(batch.kl_value == doctest::Approx(kl).epsilon(1e-12));
    CHECK(batch.gradient[0] == doctest::Approx(-dkl_dz0).epsilon(1e-9));
    CHECK(batch.gradient[1] == doctest::Approx(-dkl_dz1).epsilon(1e-9));
  }
}

TEST_CASE("compose_and_apply identities and the two-step inequality") {
  const PolicyParameters sampler = tiny_policy(80, 0.6);
  auto groups = sample_groups(sampler, 2, 4, 81, EstimatorKind::GroupNormalized);
  // Force a nonzero gradient regardless of how the rewards fell.
  for (Group& group : groups) {
    group.rollouts[0].advantage = 1.0;
    group.rollouts[0].included = true;
  }
  UpdateConfig config;
  config.kl_coef = 0.0;
  const BatchGradient batch =
      compute_batch_gradient(config, ControllerConfig{}, sampler, nullptr, groups, 1);

  SUBCASE("lr = 0 is a no-op") {
    const PolicyParameters out = compose_and_apply(sampler, batch, 0.0);
    CHECK(out.values == sampler.values);
  }

  SUBCASE("two sequential clipped updates differ from doubling the first") {
    const double lr = 4.0;  // large enough to move ratios outside the clip band
    const PolicyParameters theta1 = compose_and_apply(sampler, batch, lr);
    const BatchGradient batch2 =
        compute_batch_gradient(config, ControllerConfig{}, theta1, nullptr, groups, 1);
    const PolicyParameters theta2 = compose_and_apply(theta1, batch2, lr);
    const PolicyParameters doubled = compose_and_apply(sampler, batch, 2.0 * lr);
    double max_diff = 0.0;
    for (std::size_t i = 0; i < theta2.values.size(); ++i) {
      max_diff = std::max(max_diff, std::abs(theta2.values[i] - doubled.values[i]));
    }
    CHECK(max_diff > 1e-6);
  }
}

TEST_CASE("nonnegative advantages give a first-order ascent direction") {
  const PolicyParameters sampler = tiny_policy(90, 0.5);
  auto groups = sample_groups(sampler, 3, 4, 91, EstimatorKind::GroupNormalized);
  bool any_positive = false;
  for (Group& group : groups) {
    for (Rollout& r : group.rollouts) {
      r.advantage = std::abs(r.advantage);
      if (r.advantage > 0) any_positive = true;
    }
  }
  REQUIRE(any_positive);

  UpdateConfig config;
  config.objective = ObjectiveKind::PlainPG;
  config.kl_coef = 0.0;
  const BatchGradient batch =
      compute_batch_gradient(config, ControllerConfig{}, sampler, nullptr, groups, 1);

  auto objective_fn = [&](const std::vector<double>& theta) {
    return surrogate_value(config, theta, sampler, groups);
  };
  const double slope =
      oracles::directional_derivative(objective_fn, sampler.values, batch.gradient, 1e-5);
  CHECK(slope > 0.0);
}

TEST_CASE("empty scopes are skipped with zero gradient") {
  const PolicyParameters sampler = tiny_policy(95, 0.5);
  auto groups = sample_groups(sampler, 2, 3, 96, EstimatorKind::GroupNormalized);
  for (Rollout& r : groups[0].rollouts) r.accepted = false;

  UpdateConfig config;
  config.kl_coef = 0.0;
  const BatchGradient batch =
      compute_batch_gradient(config, ControllerConfig{}, sampler, nullptr, groups, 1);
  CHECK(batch.skipped_groups == 1);
  for (Rollout& r : groups[1].rollouts) r.accepted = false;
  const BatchGradient empty =
      compute_batch_gradient(config, ControllerConfig{}, sampler, nullptr, groups, 1);
  CHECK(empty.skipped_groups == 2);
  for (double g : empty.gradient) CHECK(g == 0.0);
}
