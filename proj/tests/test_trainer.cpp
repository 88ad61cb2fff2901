#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <sstream>

#include "entrosim/checkpoint.hpp"
#include "entrosim/errors.hpp"
#include "entrosim/trainer.hpp"
#include "oracles.hpp"

using namespace entrosim;

namespace {

RunConfig small_run(std::uint64_t seed) {
  RunConfig config;
  config.seed = seed;
  config.vocab = Vocabulary{8, 7};
  config.task.kind = TaskKind::ModularSum;
  config.prompts_per_step = 8;
  config.group_size = 4;
  config.total_samples = 8 * 4 * 60;  // 60 steps
  config.max_len = 4;
  config.update.lr = 1.0;
  config.threads = 1;
  return config;
}

std::string metrics_text(const TrainResult& result) {
  std::ostringstream out;
  out << metrics_csv_header() << '\n';
  for (const MetricsRow& row : result.metrics) out << metrics_csv_row(row) << '\n';
  return out.str();
}

class CountingObserver : public StepObserver {
 public:
  int steps = 0;
  bool conservation_ok = true;
  int expected_batch;

  explicit CountingObserver(int batch) : expected_batch(batch) {}

  void on_step(int, const std::vector<Group>& groups, const MetricsRow&) override {
    ++steps;
    int accepted = 0, rejected = 0;
    for (const Group& group : groups) {
      for (const Rollout& r : group.rollouts) {
        (r.accepted ? accepted : rejected) += 1;
      }
    }
    if (accepted + rejected != expected_batch) conservation_ok = false;
  }
};

}  // namespace

TEST_CASE("runs are byte-identical across repeats and thread counts") {
  RunConfig config = small_run(42);
  const TrainResult serial = train(config);
  const TrainResult again = train(config);
  CHECK(metrics_text(serial) == metrics_text(again));

  config.threads = 0;  // library default; OpenMP when available
  const TrainResult parallel = train(config);
  CHECK(metrics_text(serial) == metrics_text(parallel));
  CHECK(serial.params.values == parallel.params.values);
}

TEST_CASE("accepted plus rejected rollouts cover the batch every step") {
  RunConfig config = small_run(3);
  config.controller.kind = ControllerKind::Entrocraft;
  config.schedule = EntropySchedule{ScheduleFamily::Constant, 1.4, 1.4, 0.05};
  CountingObserver observer(config.prompts_per_step * config.group_size);
  train(config, &observer);
  CHECK(observer.steps == config.steps());
  CHECK(observer.conservation_ok);
}

TEST_CASE("controller none matches entrocraft with a full-range band") {
  RunConfig plain = small_run(11);
  // Half-width beyond log |V| clamps the band to [0, log |V|]: m is always 0.
  plain.schedule = EntropySchedule{ScheduleFamily::Constant, 1.0, 1.0, 10.0};
  RunConfig full_band = plain;
  full_band.controller.kind = ControllerKind::Entrocraft;

  const TrainResult a = train(plain);
  const TrainResult b = train(full_band);
  CHECK(metrics_text(a) == metrics_text(b));
  CHECK(a.params.values == b.params.values);
  for (const MetricsRow& row : b.metrics) {
    CHECK(row.m == 0);
    CHECK(row.accept_rate == 1.0);
  }
}

TEST_CASE("entropy-loss with beta 0 is bit-identical to plain GRPO") {
  RunConfig plain = small_run(11);
  RunConfig bonus = plain;
  bonus.controller.kind = ControllerKind::EntropyLoss;
  bonus.controller.beta = 0.0;
  const TrainResult a = train(plain);
  const TrainResult b = train(bonus);
  CHECK(metrics_text(a) == metrics_text(b));
  CHECK(a.params.values == b.params.values);
}

TEST_CASE("every controller kind completes a short run with sane telemetry") {
  for (ControllerKind kind :
       {ControllerKind::Entrocraft, ControllerKind::EntropyLoss, ControllerKind::ClipHigher,
        ControllerKind::ClipCov, ControllerKind::WReinforce, ControllerKind::Entropic}) {
    RunConfig config = small_run(17);
    config.total_samples = 8 * 4 * 10;
    config.controller.kind = kind;
    config.schedule = EntropySchedule{ScheduleFamily::Linear, 1.6, 0.5, 0.05};
    const TrainResult result = train(config);
    REQUIRE(result.metrics.size() == 10);
    for (const MetricsRow& row : result.metrics) {
      CHECK(row.accept_rate >= 0.0);
      CHECK(row.accept_rate <= 1.0);
      CHECK(row.entropy >= 0.0);
      CHECK(row.entropy <= config.vocab.max_entropy() + 1e-9);
      CHECK(std::isfinite(row.grad_norm));
    }
  }
}

TEST_CASE("final checkpoint round-trips through the trainer") {
  namespace fs = std::filesystem;
  RunConfig config = small_run(9);
  config.total_samples = 8 * 4 * 5;
  const TrainResult result = train(config);

  const fs::path dir = fs::temp_directory_path() / "entrosim_trainer_ckpt";
  fs::create_directories(dir);
  const std::string path = (dir / "final.bin").string();
  save_checkpoint(result.params, path);
  const PolicyParameters loaded = load_checkpoint(path);

  const std::vector<int> prompt{1, 2};
  const auto a = forward_dist(result.params, Context{prompt, {}});
  const auto b = forward_dist(loaded, Context{prompt, {}});
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  fs::remove_all(dir);
}

TEST_CASE("pass@K hand values and properties") {
  const Vocabulary vocab{16, 15};
  TaskSpec task;
  task.kind = TaskKind::ModularSum;

  SUBCASE("a policy one-hot on the truth scores 1 everywhere") {
    // Window 3 separates the answer and eos decision rows for two-operand
    // prompts (a 2-token window aliases them), so an exact policy exists.
    PolicyParameters params = make_tabular_policy(vocab, 3);
    for (int a = 0; a < 16; ++a) {
      for (int b = 0; b < 16; ++b) {
        const int answer = (a + b) % 16;
        const std::vector<int> prompt{a, b};
        const std::size_t row = tabular_row_index(params, Context{prompt, {}});
        params.values[row * 16 + answer] = 400.0;
        const std::vector<int> generated{answer};
        const std::size_t eos_row =
            tabular_row_index(params, Context{prompt, generated});
        params.values[eos_row * 16 + vocab.eos] = 400.0;
      }
    }
    const EvalResult result = evaluate_pass_at_k(params, task, 32, 8, 0.6, 5, 0, 6, 1);
    CHECK(result.mean_at_k == 1.0);
    CHECK(result.pass_at_k == 1.0);
  }

  SUBCASE("uniform policy matches the closed-form pass@K") {
    const PolicyParameters params = make_tabular_policy(vocab, 2);
    const int k = 8, prompts = 400;
    const EvalResult result = evaluate_pass_at_k(params, task, prompts, k, 1.0, 77, 0, 1, 1);
    const double p_correct = 1.0 / 16;  // single-token completions at max_len 1
    const double expected_pass = 1.0 - std::pow(1.0 - p_correct, k);
    CHECK(oracles::within_binomial_band(result.pass_at_k, expected_pass, prompts, 3.0));
    CHECK(oracles::within_binomial_band(result.mean_at_k, p_correct, prompts * k, 3.0));
  }

  SUBCASE("pass@K is nondecreasing in K by subsetting") {
    PolicyParameters params = make_tabular_policy(vocab, 2);
    RngStream init(4);
    init_gaussian(params, 1.0, init);
    RngStream prompt_stream(12);
    const int big_k = 16;
    for (int trial = 0; trial < 10; ++trial) {
      const Prompt prompt = generate_prompt(task, vocab, prompt_stream);
      const Group group = rollout_group(params, prompt, big_k, 4, 0.8, 900 + trial);
      int seen = 0;
      double previous = 0.0;
      for (int k = 1; k <= big_k; ++k) {
        seen += group.rollouts[k - 1].reward > 0.5 ? 1 : 0;
        const double pass_k = seen > 0 ? 1.0 : 0.0;
        CHECK(pass_k >= previous);
        previous = pass_k;
      }
    }
  }

  SUBCASE("mean@1 equals pass@1") {
    PolicyParameters params = make_tabular_policy(vocab, 2);
    RngStream init(8);
    init_gaussian(params, 0.7, init);
    const EvalResult result = evaluate_pass_at_k(params, task, 64, 1, 0.6, 21, 0, 6, 1);
    CHECK(result.mean_at_k == result.pass_at_k);
  }
}

TEST_CASE("failure-mode runs expose negative-sample availability") {
  RunConfig config = small_run(23);
  config.total_samples = 8 * 4 * 30;
  config.controller.kind = ControllerKind::Entrocraft;
  config.schedule = EntropySchedule{ScheduleFamily::Constant, 1.8, 1.8, 0.05};
  const FailureModeResult result = failure_mode_run(config);
  REQUIRE(result.rows.size() == 30);
  // Early training: low reward, so negative advantages are plentiful.
  int early_negatives = 0;
  for (int i = 0; i < 5; ++i) early_negatives += result.rows[i].negatives;
  CHECK(early_negatives > 0);
  for (const FailureModeRow& row : result.rows) {
    CHECK(row.negatives >= 0);
    CHECK(row.negatives <= config.prompts_per_step * config.group_size);
  }
}

TEST_CASE("non-finite state aborts with the failing step named") {
  RunConfig config = small_run(2);
  config.variant = PolicyVariant::Mlp;
  config.hidden_dim = 8;
  config.update.lr = 1e160;  // parameter products overflow in the next forward pass
  try {
    train(config);
    FAIL("expected TrainingAbort");
  } catch (const TrainingAbort& abort) {
    CHECK(std::string(abort.what()).find("step ") == 0);
  }
}

TEST_CASE("eval rows appear at the configured cadence") {
  RunConfig config = small_run(6);
  config.total_samples = 8 * 4 * 20;
  config.eval_every = 10;
  config.eval_prompts = 8;
  config.eval_k = 4;
  const TrainResult result = train(config);
  REQUIRE(result.evals.size() == 2);
  CHECK(result.evals[0].samples == 10 * 32);
  CHECK(result.evals[1].samples == 20 * 32);
  CHECK(result.evals[0].task == "modular-sum");
}
