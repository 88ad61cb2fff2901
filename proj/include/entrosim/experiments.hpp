#pragma once

// Theory-verification experiments: the advantage/entropy sign law over an
// lr grid, and the positive-vs-negative confidence gap along a training run.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "entrosim/advantage.hpp"
#include "entrosim/entropy.hpp"
#include "entrosim/trainer.hpp"

namespace entrosim {

struct SignAgreementConfig {
  std::uint64_t seed = 0;
  int trials = 1000;
  std::vector<double> lr_grid{1e-2, 1e-3, 1e-4};
  EstimatorKind estimator = EstimatorKind::GroupNormalized;
  PolicyVariant variant = PolicyVariant::Tabular;
  Vocabulary vocab;
  TaskSpec task;
  int group_size = 8;
  int max_len = 6;
  int hidden_dim = 32;
  int context_window = 2;
  double init_scale = 1.0;
  int threads = 0;
  // When > 0, trials measure one policy trained for this many steps with
  // the configured estimator instead of fresh random policies, mirroring
  // measurements taken along a training run.
  int pretrain_steps = 0;
  double pretrain_lr = 0.5;
};

struct TrialOutcome {
  int trial = 0;
  double lr = 0.0;
  bool valid = false;  // a usable nonzero-advantage rollout was found
  UpdateReport report;
};

struct SignAgreementSummary {
  double lr = 0.0;
  int trials_total = 0;
  int trials_valid = 0;
  int condition_count = 0;
  int agree_given_condition = 0;
  double frac_condition = 0.0;
  double frac_sign_given_condition = 0.0;
  double mean_log_likelihood = 0.0;
  double mean_baseline = 0.0;
};

struct SignAgreementResult {
  std::vector<TrialOutcome> outcomes;  // trial-major, lr inner
  std::vector<SignAgreementSummary> summaries;
};

/// Per trial: draw a random policy, roll out one group, estimate advantages,
/// apply a single-rollout plain policy-gradient update at each lr on the
/// grid, and report exact/predicted entropy change plus the theorem
/// condition. Trials share randomness across the lr grid.
SignAgreementResult sign_agreement_experiment(const SignAgreementConfig& config);

std::string sign_agreement_csv_header();
std::string sign_agreement_csv_row(const TrialOutcome& outcome, EstimatorKind estimator);
std::string sign_agreement_summary_csv_header();
std::string sign_agreement_summary_csv_row(const SignAgreementSummary& summary,
                                           EstimatorKind estimator);

struct ConfidenceGapRow {
  int step = 0;
  std::optional<double> mean_ll_positive;
  std::optional<double> mean_ll_negative;
};

/// Runs train(config) and records per-step mean sequence log-likelihood of
/// correct vs incorrect rollouts. Undefined means stay empty in the CSV.
std::vector<ConfidenceGapRow> confidence_gap_experiment(const RunConfig& config);

std::string confidence_gap_csv_header();
std::string confidence_gap_csv_row(const ConfidenceGapRow& row);

}  // namespace entrosim
