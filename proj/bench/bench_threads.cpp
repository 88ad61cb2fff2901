// Compares the serial reference path (threads = 1) against the OpenMP path
// on the two hot loops: the training step and the theory-experiment trials.
// Outputs are bit-identical between the paths; only wall time differs.

#include <chrono>
#include <cstdio>
#include <functional>

#include "entrosim/experiments.hpp"
#include "entrosim/parallel.hpp"
#include "entrosim/trainer.hpp"

using namespace entrosim;

namespace {

double time_seconds(const std::function<void()>& fn) {
  const auto start = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

RunConfig bench_run(int threads) {
  RunConfig config;
  config.seed = 9;
  config.vocab = Vocabulary{16, 15};
  config.task.kind = TaskKind::ModularSum;
  config.variant = PolicyVariant::Mlp;
  config.hidden_dim = 32;
  config.prompts_per_step = 32;
  config.group_size = 8;
  config.total_samples = 200LL * 32 * 8;
  config.max_len = 6;
  config.update.lr = 0.5;
  config.threads = threads;
  return config;
}

SignAgreementConfig bench_experiment(int threads) {
  SignAgreementConfig config;
  config.seed = 9;
  config.trials = 2000;
  config.lr_grid = {1e-3};
  config.vocab = Vocabulary{16, 15};
  config.task.kind = TaskKind::ModularSum;
  config.max_len = 4;
  config.init_scale = 1.0;
  config.threads = threads;
  return config;
}

}  // namespace

int main() {
  const int workers = hardware_threads();
  std::printf("worker threads available: %d\n\n", workers);
  std::printf("%-28s %10s %10s %8s\n", "kernel", "serial[s]", "openmp[s]", "speedup");

  {
    double entropy_serial = 0.0, entropy_parallel = 0.0;
    const double serial = time_seconds(
        [&] { entropy_serial = train(bench_run(1)).metrics.back().entropy; });
    const double parallel = time_seconds(
        [&] { entropy_parallel = train(bench_run(0)).metrics.back().entropy; });
    std::printf("%-28s %10.3f %10.3f %7.2fx%s\n", "train (mlp, 200 steps)", serial, parallel,
                serial / parallel,
                entropy_serial == entropy_parallel ? "" : "  RESULTS DIFFER");
  }
  {
    double agree_serial = 0.0, agree_parallel = 0.0;
    const double serial = time_seconds([&] {
      agree_serial =
          sign_agreement_experiment(bench_experiment(1)).summaries[0].frac_sign_given_condition;
    });
    const double parallel = time_seconds([&] {
      agree_parallel =
          sign_agreement_experiment(bench_experiment(0)).summaries[0].frac_sign_given_condition;
    });
    std::printf("%-28s %10.3f %10.3f %7.2fx%s\n", "sign-law trials (2000)", serial, parallel,
                serial / parallel,
                agree_serial == agree_parallel ? "" : "  RESULTS DIFFER");
  }
  return 0;
}
