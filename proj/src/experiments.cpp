#include "entrosim/experiments.hpp"

#include <cmath>
#include <sstream>

#include "entrosim/parallel.hpp"

namespace entrosim {

namespace {

constexpr int kMaxAttempts = 256;

struct TrialSetup {
  PolicyParameters params;
  Prompt prompt;
  std::vector<int> y;
  double advantage = 0.0;
  std::vector<double> gradient;
  bool valid = false;
};

TrialSetup prepare_trial(const SignAgreementConfig& config, int trial,
                         const PolicyParameters* shared_params) {
  TrialSetup setup;
  if (shared_params != nullptr) {
    setup.params = *shared_params;
  } else {
    setup.params = config.variant == PolicyVariant::Tabular
                       ? make_tabular_policy(config.vocab, config.context_window)
                       : make_mlp_policy(config.vocab, config.hidden_dim, config.context_window);
    RngStream init_stream(
        derive_key(config.seed, StreamUse::TrialInit, static_cast<std::uint64_t>(trial)));
    init_gaussian(setup.params, config.init_scale, init_stream);
  }

  // Degenerate groups carry no nonzero advantage; redraw the prompt and
  // rollouts a bounded number of times.
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    RngStream prompt_stream(derive_key(config.seed, StreamUse::TrialPrompt,
                                       static_cast<std::uint64_t>(trial),
                                       static_cast<std::uint64_t>(attempt)));
    const Prompt prompt = generate_prompt(config.task, config.vocab, prompt_stream);
    const Group group = rollout_group(setup.params, prompt, config.group_size, config.max_len,
                                      1.0,
                                      derive_key(config.seed, StreamUse::TrialRollout,
                                                 static_cast<std::uint64_t>(trial),
                                                 static_cast<std::uint64_t>(attempt)));
    std::vector<double> rewards;
    rewards.reserve(group.rollouts.size());
    for (const Rollout& r : group.rollouts) rewards.push_back(r.reward);
    const AdvantageVector adv = estimate(config.estimator, rewards);

    // Draw the updater uniformly from the estimator's retained set, the
    // same population whose confidence the experiment reports.
    std::vector<int> candidates;
    for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
      if (adv.included[i] != 0 && adv.values[i] != 0.0) {
        candidates.push_back(static_cast<int>(i));
      }
    }
    if (!candidates.empty()) {
      RngStream pick_stream(derive_key(config.seed, StreamUse::TrialRollout,
                                       static_cast<std::uint64_t>(trial),
                                       static_cast<std::uint64_t>(attempt), 0x70696b));
      const int i = candidates[pick_stream.next_below(
          static_cast<std::uint32_t>(candidates.size()))];
      setup.prompt = prompt;
      setup.y = group.rollouts[i].y;
      setup.advantage = adv.values[i];
      setup.valid = true;
      break;
    }
  }

  if (setup.valid) {
    // Single-rollout plain policy-gradient direction A * grad log pi(y|x).
    setup.gradient = logprob_gradient(setup.params, setup.prompt.tokens, setup.y);
    for (double& g : setup.gradient) g *= setup.advantage;
  }
  return setup;
}

}  // namespace

SignAgreementResult sign_agreement_experiment(const SignAgreementConfig& config) {
  const int trials = config.trials;
  const int lr_count = static_cast<int>(config.lr_grid.size());
  SignAgreementResult result;
  result.outcomes.resize(static_cast<std::size_t>(trials) * lr_count);

  // Measurement target: either fresh random policies per trial, or one
  // policy trained with the configured estimator.
  PolicyParameters pretrained;
  const PolicyParameters* shared_params = nullptr;
  if (config.pretrain_steps > 0) {
    RunConfig pretrain;
    pretrain.seed = derive_key(config.seed, StreamUse::ParamInit, 0x70726574);
    pretrain.prompts_per_step = 32;
    pretrain.group_size = config.group_size;
    pretrain.total_samples = static_cast<long long>(config.pretrain_steps) *
                             pretrain.prompts_per_step * pretrain.group_size;
    pretrain.max_len = config.max_len;
    pretrain.task = config.task;
    pretrain.vocab = config.vocab;
    pretrain.variant = config.variant;
    pretrain.hidden_dim = config.hidden_dim;
    pretrain.context_window = config.context_window;
    pretrain.estimator = config.estimator;
    pretrain.update.lr = config.pretrain_lr;
    pretrain.init = config.init_scale > 0.0 ? InitKind::Gaussian : InitKind::Auto;
    pretrain.init_scale = config.init_scale;
    pretrain.threads = config.threads;
    pretrained = train(pretrain).params;
    shared_params = &pretrained;
  }

  parallel_for_checked(trials, config.threads, [&](int trial) {
    const TrialSetup setup = prepare_trial(config, trial, shared_params);
    for (int li = 0; li < lr_count; ++li) {
      TrialOutcome& out = result.outcomes[static_cast<std::size_t>(trial) * lr_count + li];
      out.trial = trial;
      out.lr = config.lr_grid[li];
      out.valid = setup.valid;
      if (!setup.valid) continue;
      const PolicyParameters after = apply_update(setup.params, setup.gradient, out.lr);
      out.report =
          analyze_update(setup.params, after, setup.prompt.tokens, setup.y, setup.advantage);
    }
  });

  for (int li = 0; li < lr_count; ++li) {
    SignAgreementSummary summary;
    summary.lr = config.lr_grid[li];
    summary.trials_total = trials;
    summary.frac_sign_given_condition = 1.0;  // vacuous when nothing satisfies the condition
    double ll_sum = 0.0, baseline_sum = 0.0;
    int baseline_count = 0;
    for (int trial = 0; trial < trials; ++trial) {
      const TrialOutcome& out = result.outcomes[static_cast<std::size_t>(trial) * lr_count + li];
      if (!out.valid) continue;
      ++summary.trials_valid;
      if (out.report.baseline_defined) {
        ll_sum += out.report.log_likelihood;
        baseline_sum += out.report.output_space_baseline;
        ++baseline_count;
      }
      if (out.report.condition_holds) {
        ++summary.condition_count;
        if (out.report.sign_agrees) ++summary.agree_given_condition;
      }
    }
    if (summary.trials_valid > 0) {
      summary.frac_condition =
          static_cast<double>(summary.condition_count) / summary.trials_valid;
    }
    if (summary.condition_count > 0) {
      summary.frac_sign_given_condition =
          static_cast<double>(summary.agree_given_condition) / summary.condition_count;
    }
    if (baseline_count > 0) {
      summary.mean_log_likelihood = ll_sum / baseline_count;
      summary.mean_baseline = baseline_sum / baseline_count;
    }
    result.summaries.push_back(summary);
  }
  return result;
}

std::string sign_agreement_csv_header() {
  return "trial,lr,estimator,advantage,log_likelihood,baseline,condition,dH_exact,dH_pred,"
         "sign_agrees";
}

std::string sign_agreement_csv_row(const TrialOutcome& out, EstimatorKind estimator) {
  std::ostringstream row;
  row << out.trial << ',' << format_double(out.lr) << ',' << estimator_name(estimator) << ','
      << format_double(out.report.advantage) << ','
      << format_double(out.report.log_likelihood) << ',';
  if (out.report.baseline_defined) row << format_double(out.report.output_space_baseline);
  row << ',' << (out.report.condition_holds ? 1 : 0) << ','
      << format_double(out.report.delta_h_exact) << ','
      << format_double(out.report.delta_h_first_order) << ','
      << (out.report.sign_agrees ? 1 : 0);
  return row.str();
}

std::string sign_agreement_summary_csv_header() {
  return "lr,estimator,trials,valid,frac_condition,frac_sign_given_condition,"
         "mean_log_likelihood,mean_baseline";
}

std::string sign_agreement_summary_csv_row(const SignAgreementSummary& s,
                                           EstimatorKind estimator) {
  std::ostringstream row;
  row << format_double(s.lr) << ',' << estimator_name(estimator) << ',' << s.trials_total << ','
      << s.trials_valid << ',' << format_double(s.frac_condition) << ','
      << format_double(s.frac_sign_given_condition) << ','
      << format_double(s.mean_log_likelihood) << ',' << format_double(s.mean_baseline);
  return row.str();
}

namespace {

class GapObserver : public StepObserver {
 public:
  std::vector<ConfidenceGapRow> rows;

  void on_step(int step, const std::vector<Group>& groups, const MetricsRow&) override {
    ConfidenceGapRow row;
    row.step = step;
    double pos_sum = 0.0, neg_sum = 0.0;
    int pos_count = 0, neg_count = 0;
    for (const Group& group : groups) {
      for (const Rollout& r : group.rollouts) {
        if (r.reward > 0.5) {
          pos_sum += r.log_likelihood;
          ++pos_count;
        } else {
          neg_sum += r.log_likelihood;
          ++neg_count;
        }
      }
    }
    if (pos_count > 0) row.mean_ll_positive = pos_sum / pos_count;
    if (neg_count > 0) row.mean_ll_negative = neg_sum / neg_count;
    rows.push_back(row);
  }
};

}  // namespace

std::vector<ConfidenceGapRow> confidence_gap_experiment(const RunConfig& config) {
  GapObserver observer;
  train(config, &observer);
  return std::move(observer.rows);
}

std::string confidence_gap_csv_header() { return "step,mean_ll_positive,mean_ll_negative"; }

std::string confidence_gap_csv_row(const ConfidenceGapRow& row) {
  std::ostringstream out;
  out << row.step << ',';
  if (row.mean_ll_positive) out << format_double(*row.mean_ll_positive);
  out << ',';
  if (row.mean_ll_negative) out << format_double(*row.mean_ll_negative);
  return out.str();
}

}  // namespace entrosim
