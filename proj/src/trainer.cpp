#include "entrosim/trainer.hpp"

#include <algorithm>

#include <cmath>
#include <cstdio>
#include <sstream>

#include "entrosim/checkpoint.hpp"
#include "entrosim/entropy.hpp"
#include "entrosim/errors.hpp"
#include "entrosim/parallel.hpp"

namespace entrosim {

int RunConfig::steps() const {
  const long long per_step =
      static_cast<long long>(prompts_per_step) * static_cast<long long>(group_size);
  if (per_step <= 0) throw ConfigError("prompts_per_step and group_size must be positive");
  if (total_samples <= 0 || total_samples % per_step != 0) {
    throw ConfigError("run.total_samples must be a positive multiple of prompts_per_step * G");
  }
  return static_cast<int>(total_samples / per_step);
}

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", value);
  return buf;
}

std::string metrics_csv_header() {
  return "step,samples,reward,entropy,target,m,accept_rate,skipped,clip_frac,kl,grad_norm";
}

std::string metrics_csv_row(const MetricsRow& r) {
  std::ostringstream out;
  out << r.step << ',' << r.samples << ',' << format_double(r.reward) << ','
      << format_double(r.entropy) << ',' << format_double(r.target) << ',' << r.m << ','
      << format_double(r.accept_rate) << ',' << r.skipped << ',' << format_double(r.clip_frac)
      << ',' << format_double(r.kl) << ',' << format_double(r.grad_norm);
  return out.str();
}

std::string eval_csv_header() { return "samples,task,K,mean_at_k,pass_at_k"; }

std::string eval_csv_row(const EvalRow& r) {
  std::ostringstream out;
  out << r.samples << ',' << r.task << ',' << r.k << ',' << format_double(r.mean_at_k) << ','
      << format_double(r.pass_at_k);
  return out.str();
}

PolicyParameters make_policy(const RunConfig& config) {
  config.vocab.validate();
  config.task.validate(config.vocab);
  PolicyParameters params = config.variant == PolicyVariant::Tabular
                                ? make_tabular_policy(config.vocab, config.context_window)
                                : make_mlp_policy(config.vocab, config.hidden_dim,
                                                  config.context_window);
  const bool gaussian =
      config.init == InitKind::Gaussian ||
      (config.init == InitKind::Auto && config.variant == PolicyVariant::Mlp);
  if (gaussian) {
    RngStream stream(derive_key(config.seed, StreamUse::ParamInit));
    init_gaussian(params, config.init_scale, stream);
  }
  return params;
}

TrainResult train(const RunConfig& config, StepObserver* observer, std::ostream* metrics_out,
                  std::ostream* eval_out, const std::string& checkpoint_prefix) {
  const int steps = config.steps();
  const int prompts = config.prompts_per_step;
  const int group_size = config.group_size;

  TrainResult result;
  result.params = make_policy(config);
  result.metrics.reserve(steps);

  // Reference snapshot for the KL penalty (the initial checkpoint).
  const PolicyParameters reference = result.params;
  const PolicyParameters* kl_ref = config.update.kl_coef > 0.0 ? &reference : nullptr;

  if (metrics_out) *metrics_out << metrics_csv_header() << '\n';
  if (eval_out) *eval_out << eval_csv_header() << '\n';

  BatchGradient last_batch;
  const int batch_rollouts = prompts * group_size;
  for (int step = 0; step < steps; ++step) {
    const double progress = steps > 1 ? static_cast<double>(step) / steps : 0.0;

    std::vector<Group> groups(prompts);
    double reward_sum = 0.0;
    double batch_entropy = 0.0;
    double target_mid = 0.0;
    int m = 0;
    int accepted = batch_rollouts;
    try {
    // Rollout generation, on-policy: the sampler is the pre-update learner.
    parallel_for_checked(prompts, config.threads, [&](int p) {
      RngStream prompt_stream(
          derive_key(config.seed, StreamUse::Prompt, static_cast<std::uint64_t>(step),
                     static_cast<std::uint64_t>(p)));
      Prompt prompt = generate_prompt(config.task, config.vocab, prompt_stream);
      groups[p] = rollout_group(result.params, prompt, group_size, config.max_len, 1.0,
                                derive_key(config.seed, StreamUse::Rollout,
                                           static_cast<std::uint64_t>(step),
                                           static_cast<std::uint64_t>(p)));
      for (Rollout& r : groups[p].rollouts) r.prompt_index = p;
      assign_advantages(groups[p], estimate(config.estimator, [&] {
                          std::vector<double> rewards;
                          rewards.reserve(groups[p].rollouts.size());
                          for (const Rollout& r : groups[p].rollouts) rewards.push_back(r.reward);
                          return rewards;
                        }()));
    });

    // Batch entropy from the current step's teacher-forced distributions,
    // measured before the update.
    double entropy_sum = 0.0;
    for (const Group& group : groups) {
      for (const Rollout& r : group.rollouts) {
        entropy_sum += sequence_entropy(r.step_dists);
        reward_sum += r.reward;
      }
    }
    // Rounding in the entropy sums can exceed log |V| by an ulp at exactly
    // uniform policies; the telemetry invariant pins the value inside the
    // mathematical range.
    batch_entropy =
        std::min(entropy_sum / batch_rollouts, config.vocab.max_entropy());

    const EntropyBand band = target_band(config.schedule, progress, config.vocab.max_entropy());
    target_mid = schedule_target(config.schedule, progress);
    m = out_of_range_indicator(batch_entropy, band);

    switch (config.controller.kind) {
      case ControllerKind::Entrocraft: {
        accepted = 0;
        for (int p = 0; p < prompts; ++p) {
          RngStream filter_stream(
              derive_key(config.seed, StreamUse::Filter, static_cast<std::uint64_t>(step),
                         static_cast<std::uint64_t>(p)));
          accepted += filter_group(groups[p], m, config.controller.gamma, filter_stream);
        }
        break;
      }
      case ControllerKind::WReinforce:
        for (Group& group : groups) apply_w_reinforce(group, config.controller.lambda);
        break;
      case ControllerKind::Entropic: {
        const double alpha =
            entropic_alpha(config.controller.alpha_gain, target_mid, batch_entropy);
        for (Group& group : groups) apply_entropic(group, alpha);
        break;
      }
      default:
        break;
    }

    BatchGradient batch = compute_batch_gradient(config.update, config.controller,
                                                 result.params, kl_ref, groups,
                                                 config.threads);
    result.params = compose_and_apply(result.params, batch, config.update.lr);
    last_batch = std::move(batch);
    } catch (const std::exception& abort) {
      throw TrainingAbort("step " + std::to_string(step) + ": " + abort.what());
    }

    MetricsRow row;
    row.step = step;
    row.samples = static_cast<long long>(step + 1) * batch_rollouts;
    row.reward = reward_sum / batch_rollouts;
    row.entropy = batch_entropy;
    row.target = target_mid;
    row.m = m;
    row.accept_rate = static_cast<double>(accepted) / batch_rollouts;
    row.skipped = last_batch.skipped_groups;
    row.clip_frac = last_batch.clip_fraction;
    row.kl = last_batch.kl_value;
    row.grad_norm = last_batch.grad_norm;
    result.metrics.push_back(row);
    if (metrics_out) *metrics_out << metrics_csv_row(row) << '\n';
    if (observer) observer->on_step(step, groups, row);

    if (config.eval_every > 0 && (step + 1) % config.eval_every == 0) {
      const EvalResult eval = evaluate_pass_at_k(
          result.params, config.task, config.eval_prompts, config.eval_k,
          config.eval_temperature, config.seed, static_cast<std::uint64_t>(step + 1),
          config.max_len, config.threads);
      EvalRow erow{row.samples, task_kind_name(config.task.kind), config.eval_k,
                   eval.mean_at_k, eval.pass_at_k};
      result.evals.push_back(erow);
      if (eval_out) *eval_out << eval_csv_row(erow) << '\n';
    }

    if (!checkpoint_prefix.empty() && config.checkpoint_every > 0 &&
        (step + 1) % config.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof(name), "ckpt_step%06d.bin", step + 1);
      save_checkpoint(result.params, checkpoint_prefix + name);
    }
  }
  return result;
}

EvalResult evaluate_pass_at_k(const PolicyParameters& params, const TaskSpec& task,
                              int n_prompts, int k, double temperature, std::uint64_t seed,
                              std::uint64_t sample_salt, int max_len, int threads) {
  if (n_prompts < 1 || k < 1) throw ConfigError("evaluation needs n_prompts >= 1 and K >= 1");
  std::vector<int> correct(n_prompts, 0);
  parallel_for_checked(n_prompts, threads, [&](int i) {
    RngStream prompt_stream(
        derive_key(seed, StreamUse::EvalPrompt, static_cast<std::uint64_t>(i)));
    const Prompt prompt = generate_prompt(task, params.vocab, prompt_stream);
    const Group group =
        rollout_group(params, prompt, k, max_len, temperature,
                      derive_key(seed, StreamUse::EvalSample, static_cast<std::uint64_t>(i),
                                 sample_salt));
    for (const Rollout& r : group.rollouts) correct[i] += r.reward > 0.5 ? 1 : 0;
  });

  EvalResult result;
  for (int c : correct) {
    result.mean_at_k += static_cast<double>(c) / k;
    result.pass_at_k += c > 0 ? 1.0 : 0.0;
  }
  result.mean_at_k /= n_prompts;
  result.pass_at_k /= n_prompts;
  return result;
}

namespace {

class NegativeCounter : public StepObserver {
 public:
  std::vector<FailureModeRow> rows;

  void on_step(int step, const std::vector<Group>& groups, const MetricsRow& row) override {
    FailureModeRow out;
    out.step = step;
    out.entropy = row.entropy;
    out.accept_rate = row.accept_rate;
    for (const Group& group : groups) {
      for (const Rollout& r : group.rollouts) {
        if (r.advantage < 0.0) ++out.negatives;
      }
    }
    rows.push_back(out);
  }
};

}  // namespace

FailureModeResult failure_mode_run(const RunConfig& config) {
  NegativeCounter counter;
  FailureModeResult result;
  result.result = train(config, &counter);
  result.rows = std::move(counter.rows);
  return result;
}

}  // namespace entrosim
