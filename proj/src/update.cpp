#include "entrosim/update.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "entrosim/entropy.hpp"
#include "entrosim/errors.hpp"
#include "entrosim/parallel.hpp"

namespace entrosim {

RatioResult importance_ratios(const PolicyParameters& learner, const Prompt& prompt,
                              const Rollout& rollout) {
  RatioResult result;
  result.ratios.reserve(rollout.y.size());
  const std::span<const int> prompt_span(prompt.tokens);
  const std::span<const int> y(rollout.y);
  for (std::size_t t = 0; t < y.size(); ++t) {
    const std::vector<double> p = forward_dist(learner, Context{prompt_span, y.subspan(0, t)});
    double sampler_p = rollout.step_dists[t][y[t]];
    if (sampler_p < kProbFloor) {
      sampler_p = kProbFloor;
      ++result.floored;
    }
    result.ratios.push_back(p[y[t]] / sampler_p);
  }
  return result;
}

double gspo_ratio(const PolicyParameters& learner, const Prompt& prompt,
                  const Rollout& rollout) {
  const double learner_ll =
      sequence_log_likelihood(learner, prompt.tokens, rollout.y);
  return std::exp((learner_ll - rollout.log_likelihood) /
                  static_cast<double>(rollout.y.size()));
}

namespace {

// Cached learner pass over one rollout.
struct RolloutEval {
  std::vector<std::vector<double>> dists;  // learner teacher-forced
  std::vector<double> logp;                // learner log p(y_t)
  std::vector<double> ratios;              // per-token or uniform gspo ratio
  double seq_ratio = 1.0;
  long floored = 0;
};

struct GroupWork {
  std::vector<int> scope;
  std::vector<RolloutEval> evals;  // parallel to scope
};

struct GroupPiece {
  std::vector<double> surrogate;  // 1/|S_x|-normalized group objective gradient
  std::vector<double> extras;     // unnormalized sum of entropy-bonus/KL token grads
  double ratio_sum = 0.0;
  double kl_sum = 0.0;
  long clipped = 0;
  long tokens = 0;
  long floored = 0;
  bool skipped = false;
};

bool clip_inactive(double advantage, double ratio, double eps_low, double eps_high) {
  // True when the min selects the clipped constant branch: no gradient flows.
  return (advantage > 0.0 && ratio > 1.0 + eps_high) ||
         (advantage < 0.0 && ratio < 1.0 - eps_low);
}

}  // namespace

BatchGradient compute_batch_gradient(const UpdateConfig& config,
                                     const ControllerConfig& controller,
                                     const PolicyParameters& learner,
                                     const PolicyParameters* kl_reference,
                                     const std::vector<Group>& groups, int threads) {
  const int group_count = static_cast<int>(groups.size());
  const std::size_t param_count = learner.values.size();
  const int vocab_size = learner.vocab.size;

  const bool entropy_bonus =
      controller.kind == ControllerKind::EntropyLoss && controller.beta != 0.0;
  const bool kl_active = kl_reference != nullptr && config.kl_coef > 0.0;
  const bool clip_cov = controller.kind == ControllerKind::ClipCov;
  const double eps_high =
      controller.kind == ControllerKind::ClipHigher ? controller.eps_high : config.eps_high;

  // Phase 1: teacher-force the learner over every in-scope rollout.
  std::vector<GroupWork> work(groups.size());
  parallel_for_checked(group_count, threads, [&](int g) {
    const Group& group = groups[g];
    GroupWork& w = work[g];
    w.scope = gradient_scope(group);
    w.evals.resize(w.scope.size());
    for (std::size_t s = 0; s < w.scope.size(); ++s) {
      const Rollout& r = group.rollouts[w.scope[s]];
      RolloutEval& e = w.evals[s];
      e.dists = teacher_forced_dists(learner, group.prompt.tokens, r.y);
      e.logp.resize(r.y.size());
      e.ratios.resize(r.y.size());
      for (std::size_t t = 0; t < r.y.size(); ++t) {
        e.logp[t] = floored_log(e.dists[t][r.y[t]]);
        double sampler_p = r.step_dists[t][r.y[t]];
        if (sampler_p < kProbFloor) {
          sampler_p = kProbFloor;
          ++e.floored;
        }
        e.ratios[t] = e.dists[t][r.y[t]] / sampler_p;
      }
      if (config.objective == ObjectiveKind::GspoClipped) {
        double ll = 0.0, sampler_ll = r.log_likelihood;
        for (double lp : e.logp) ll += lp;
        e.seq_ratio = std::exp((ll - sampler_ll) / static_cast<double>(r.y.size()));
      }
    }
  });

  // Clip-cov: mask the top-fraction of tokens by (logp - batch mean) * A.
  // Masks are chosen from an ordered batch-level ranking, so the result does
  // not depend on thread count.
  std::vector<std::vector<std::vector<std::uint8_t>>> masked(groups.size());
  if (clip_cov) {
    double logp_sum = 0.0;
    long token_count = 0;
    for (const GroupWork& w : work) {
      for (const RolloutEval& e : w.evals) {
        for (double lp : e.logp) logp_sum += lp;
        token_count += static_cast<long>(e.logp.size());
      }
    }
    if (token_count > 0) {
      const double mean_logp = logp_sum / static_cast<double>(token_count);
      struct Scored {
        double score;
        int g;
        int s;
        int t;
      };
      std::vector<Scored> scored;
      scored.reserve(static_cast<std::size_t>(token_count));
      for (int g = 0; g < group_count; ++g) {
        const GroupWork& w = work[g];
        for (std::size_t s = 0; s < w.scope.size(); ++s) {
          const Rollout& r = groups[g].rollouts[w.scope[s]];
          for (std::size_t t = 0; t < r.y.size(); ++t) {
            scored.push_back({(w.evals[s].logp[t] - mean_logp) * r.advantage, g,
                              static_cast<int>(s), static_cast<int>(t)});
          }
        }
      }
      const std::size_t mask_count = static_cast<std::size_t>(
          controller.clip_fraction * static_cast<double>(token_count));
      std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.g != b.g) return a.g < b.g;
        if (a.s != b.s) return a.s < b.s;
        return a.t < b.t;
      });
      for (int g = 0; g < group_count; ++g) {
        masked[g].resize(work[g].scope.size());
        for (std::size_t s = 0; s < work[g].scope.size(); ++s) {
          masked[g][s].assign(work[g].evals[s].logp.size(), 0);
        }
      }
      for (std::size_t i = 0; i < mask_count && i < scored.size(); ++i) {
        masked[scored[i].g][scored[i].s][scored[i].t] = 1;
      }
    }
  }

  // Phase 2: per-group gradient pieces.
  std::vector<GroupPiece> pieces(groups.size());
  parallel_for_checked(group_count, threads, [&](int g) {
    const Group& group = groups[g];
    const GroupWork& w = work[g];
    GroupPiece& piece = pieces[g];
    if (w.scope.empty()) {
      piece.skipped = true;
      return;
    }
    piece.surrogate.assign(param_count, 0.0);
    if (entropy_bonus || kl_active) piece.extras.assign(param_count, 0.0);

    const double scope_norm = 1.0 / static_cast<double>(w.scope.size());
    std::vector<double> dlogits(vocab_size);

    for (std::size_t s = 0; s < w.scope.size(); ++s) {
      const Rollout& r = group.rollouts[w.scope[s]];
      const RolloutEval& e = w.evals[s];
      const std::span<const int> prompt_span(group.prompt.tokens);
      const std::span<const int> y(r.y);
      const double seq_norm =
          config.length_norm ? 1.0 / static_cast<double>(y.size()) : 1.0;
      piece.floored += e.floored;

      for (std::size_t t = 0; t < y.size(); ++t) {
        const Context ctx{prompt_span, y.subspan(0, t)};
        const std::vector<double>& p = e.dists[t];
        ++piece.tokens;

        double used_ratio = 1.0;
        double coef = 0.0;  // weight on grad log pi(y_t | ctx)
        switch (config.objective) {
          case ObjectiveKind::PlainPG:
            used_ratio = e.ratios[t];
            coef = r.advantage;
            break;
          case ObjectiveKind::GrpoClipped:
            used_ratio = e.ratios[t];
            if (clip_inactive(r.advantage, used_ratio, config.eps_low, eps_high)) {
              ++piece.clipped;
            } else {
              coef = r.advantage * used_ratio;
            }
            break;
          case ObjectiveKind::GspoClipped:
            used_ratio = e.seq_ratio;
            if (clip_inactive(r.advantage, used_ratio, config.eps_low, eps_high)) {
              ++piece.clipped;
            } else {
              coef = r.advantage * used_ratio;
            }
            break;
        }
        piece.ratio_sum += used_ratio;

        const bool token_masked = clip_cov && !masked[g].empty() && masked[g][s][t] != 0;
        if (coef != 0.0 && !token_masked) {
          const double weight = coef * scope_norm * seq_norm;
          for (int i = 0; i < vocab_size; ++i) dlogits[i] = -weight * p[i];
          dlogits[y[t]] += weight;
          accumulate_logit_gradient(learner, ctx, dlogits, piece.surrogate);
        }

        if (entropy_bonus) {
          const double h = token_entropy(p);
          for (int i = 0; i < vocab_size; ++i) {
            dlogits[i] = -controller.beta * p[i] * (floored_log(p[i]) + h);
          }
          accumulate_logit_gradient(learner, ctx, dlogits, piece.extras);
        }
        if (kl_active) {
          const std::vector<double> q = forward_dist(*kl_reference, ctx);
          double kl = 0.0;
          for (int i = 0; i < vocab_size; ++i) {
            if (p[i] > 0.0) kl += p[i] * (floored_log(p[i]) - floored_log(q[i]));
          }
          piece.kl_sum += kl;
          for (int i = 0; i < vocab_size; ++i) {
            dlogits[i] = -config.kl_coef * p[i] * ((floored_log(p[i]) - floored_log(q[i])) - kl);
          }
          accumulate_logit_gradient(learner, ctx, dlogits, piece.extras);
        }
      }
    }
  });

  // Ordered reduction keeps floating-point sums identical across thread counts.
  BatchGradient batch;
  batch.gradient.assign(param_count, 0.0);
  double ratio_sum = 0.0, kl_sum = 0.0;
  long clipped = 0;
  for (const GroupPiece& piece : pieces) {
    if (piece.skipped) {
      ++batch.skipped_groups;
      continue;
    }
    batch.tokens += piece.tokens;
    batch.floored_ratios += piece.floored;
    ratio_sum += piece.ratio_sum;
    kl_sum += piece.kl_sum;
    clipped += piece.clipped;
  }

  const double group_norm = group_count > 0 ? 1.0 / static_cast<double>(group_count) : 0.0;
  const double token_norm = batch.tokens > 0 ? 1.0 / static_cast<double>(batch.tokens) : 0.0;
  for (const GroupPiece& piece : pieces) {
    if (piece.skipped) continue;
    for (std::size_t i = 0; i < param_count; ++i) {
      batch.gradient[i] += group_norm * piece.surrogate[i];
    }
    if (!piece.extras.empty()) {
      for (std::size_t i = 0; i < param_count; ++i) {
        batch.gradient[i] += token_norm * piece.extras[i];
      }
    }
  }

  if (batch.tokens > 0) {
    batch.mean_ratio = ratio_sum / static_cast<double>(batch.tokens);
    batch.clip_fraction = static_cast<double>(clipped) / static_cast<double>(batch.tokens);
    batch.kl_value = kl_active ? kl_sum / static_cast<double>(batch.tokens) : 0.0;
  }
  double norm_sq = 0.0;
  for (double v : batch.gradient) norm_sq += v * v;
  batch.grad_norm = std::sqrt(norm_sq);
  return batch;
}

PolicyParameters compose_and_apply(const PolicyParameters& params, const BatchGradient& batch,
                                   double lr) {
  for (double v : batch.gradient) {
    if (!std::isfinite(v)) throw TrainingAbort("non-finite gradient in update");
  }
  return apply_update(params, batch.gradient, lr);
}

std::string objective_name(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::PlainPG: return "plain-pg";
    case ObjectiveKind::GrpoClipped: return "grpo-clipped";
    case ObjectiveKind::GspoClipped: return "gspo-clipped";
  }
  return "?";
}

}  // namespace entrosim
