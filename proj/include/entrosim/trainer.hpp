#pragma once

// The training loop: rollouts -> advantages -> controller -> one update per
// step, with CSV telemetry, pass@K evaluation and checkpointing. Steps are
// strictly sequential; groups within a step run in parallel and are reduced
// in prompt order, so runs are byte-reproducible for any thread count.

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "entrosim/advantage.hpp"
#include "entrosim/controller.hpp"
#include "entrosim/policy.hpp"
#include "entrosim/schedule.hpp"
#include "entrosim/task.hpp"
#include "entrosim/update.hpp"

namespace entrosim {

enum class InitKind { Auto, Zero, Gaussian };

struct RunConfig {
  std::uint64_t seed = 0;
  long long total_samples = 512000;
  int prompts_per_step = 32;
  int group_size = 8;
  int max_len = 6;

  TaskSpec task;
  Vocabulary vocab;

  PolicyVariant variant = PolicyVariant::Tabular;
  int hidden_dim = 32;
  int context_window = 2;
  InitKind init = InitKind::Auto;  // Auto: zero for tabular, gaussian for mlp
  double init_scale = 0.1;

  EstimatorKind estimator = EstimatorKind::GroupNormalized;
  ControllerConfig controller;
  EntropySchedule schedule;  // targets in nats
  UpdateConfig update;

  int eval_every = 0;  // steps; 0 disables in-run evaluation
  int eval_prompts = 64;
  int eval_k = 32;
  double eval_temperature = 0.6;
  int checkpoint_every = 0;  // steps; 0 keeps only the final checkpoint
  int threads = 0;           // 0: library default; 1: serial reference path
  std::string out_dir = "out";

  int steps() const;  // throws ConfigError unless total_samples divides evenly
};

struct MetricsRow {
  int step = 0;
  long long samples = 0;
  double reward = 0.0;
  double entropy = 0.0;
  double target = 0.0;
  int m = 0;
  double accept_rate = 0.0;
  int skipped = 0;
  double clip_frac = 0.0;
  double kl = 0.0;
  double grad_norm = 0.0;
};

struct EvalRow {
  long long samples = 0;
  std::string task;
  int k = 0;
  double mean_at_k = 0.0;
  double pass_at_k = 0.0;
};

std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsRow& row);
std::string eval_csv_header();
std::string eval_csv_row(const EvalRow& row);

/// Deterministic double formatting shared by every CSV writer.
std::string format_double(double value);

/// Observes each completed step; groups carry advantages and filter flags.
class StepObserver {
 public:
  virtual ~StepObserver() = default;
  virtual void on_step(int step, const std::vector<Group>& groups, const MetricsRow& row) = 0;
};

struct TrainResult {
  PolicyParameters params;
  std::vector<MetricsRow> metrics;
  std::vector<EvalRow> evals;
};

/// Builds the run's initial policy (init applied from the seed).
PolicyParameters make_policy(const RunConfig& config);

/// Runs the full loop. Optional sinks stream CSV rows as steps complete;
/// checkpoint_prefix enables cadence checkpoints named
/// <prefix>ckpt_step<NNNNNN>.bin. Aborts with TrainingAbort (naming the
/// step) if the training state goes non-finite.
TrainResult train(const RunConfig& config, StepObserver* observer = nullptr,
                  std::ostream* metrics_out = nullptr, std::ostream* eval_out = nullptr,
                  const std::string& checkpoint_prefix = "");

struct EvalResult {
  double mean_at_k = 0.0;
  double pass_at_k = 0.0;
};

/// mean@K and pass@K over freshly sampled prompts. Prompt streams depend on
/// (seed, prompt index); sample streams additionally on sample_salt, letting
/// in-run evaluations reuse one prompt set with fresh completions.
EvalResult evaluate_pass_at_k(const PolicyParameters& params, const TaskSpec& task,
                              int n_prompts, int k, double temperature, std::uint64_t seed,
                              std::uint64_t sample_salt, int max_len, int threads);

struct FailureModeRow {
  int step = 0;
  int negatives = 0;     // rollouts with negative advantage this step
  double entropy = 0.0;
  double accept_rate = 0.0;
};

struct FailureModeResult {
  TrainResult result;
  std::vector<FailureModeRow> rows;
};

/// A train() run instrumented with the negative-sample availability counter
/// used to exhibit the high-constant-target scarcity mechanism.
FailureModeResult failure_mode_run(const RunConfig& config);

}  // namespace entrosim
