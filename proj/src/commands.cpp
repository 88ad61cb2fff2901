#include "entrosim/commands.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "entrosim/checkpoint.hpp"
#include "entrosim/config.hpp"
#include "entrosim/errors.hpp"
#include "entrosim/experiments.hpp"

namespace entrosim {

namespace {

namespace fs = std::filesystem;

std::string resolve_out_dir(const std::string& override_dir, const std::string& config_dir) {
  if (!override_dir.empty()) return override_dir;
  if (const char* env = std::getenv("ENTROSIM_OUT"); env != nullptr && env[0] != '\0') {
    return env;
  }
  return config_dir;
}

void write_manifest(const std::string& dir, const std::string& command, std::uint64_t seed,
                    const ConfigMap& canonical, const std::vector<std::string>& outputs) {
  std::ofstream out(fs::path(dir) / "manifest.txt", std::ios::trunc);
  if (!out) throw ConfigError("cannot write manifest in " + dir);
  out << "entrosim manifest v1\n"
      << "version: " << kVersion << '\n'
      << "command: " << command << '\n'
      << "seed: " << seed << '\n'
      << "outputs:\n";
  out << "  manifest.txt\n";
  for (const std::string& name : outputs) out << "  " << name << '\n';
  out << "config:\n";
  for (const auto& [key, value] : canonical.entries) {
    out << "  " << key << " = " << value << '\n';
  }
}

ResolvedConfig load_resolved(const std::string& config_path,
                             const std::vector<std::string>& overrides) {
  ConfigMap raw = load_config_file(config_path);
  apply_overrides(raw, overrides);
  return resolve_config(raw);
}

std::vector<std::string> train_outputs(const RunConfig& run) {
  std::vector<std::string> outputs{"metrics.csv"};
  if (run.eval_every > 0) outputs.push_back("eval.csv");
  if (run.checkpoint_every > 0) {
    for (int step = run.checkpoint_every; step <= run.steps(); step += run.checkpoint_every) {
      char name[32];
      std::snprintf(name, sizeof(name), "ckpt_step%06d.bin", step);
      outputs.emplace_back(name);
    }
  }
  outputs.emplace_back("ckpt_final.bin");
  return outputs;
}

int run_train_into(const RunConfig& run, const ConfigMap& canonical, const std::string& dir) {
  fs::create_directories(dir);
  write_manifest(dir, "train", run.seed, canonical, train_outputs(run));

  std::ofstream metrics(fs::path(dir) / "metrics.csv", std::ios::trunc);
  if (!metrics) throw ConfigError("cannot write metrics.csv in " + dir);
  std::ofstream eval_file;
  std::ostream* eval_out = nullptr;
  if (run.eval_every > 0) {
    eval_file.open(fs::path(dir) / "eval.csv", std::ios::trunc);
    if (!eval_file) throw ConfigError("cannot write eval.csv in " + dir);
    eval_out = &eval_file;
  }

  const std::string prefix = (fs::path(dir) / "").string();
  const TrainResult result = train(run, nullptr, &metrics, eval_out, prefix);
  save_checkpoint(result.params, (fs::path(dir) / "ckpt_final.bin").string());
  return 0;
}

}  // namespace

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& out_override) {
  try {
    const ResolvedConfig resolved = load_resolved(config_path, overrides);
    const std::string dir = resolve_out_dir(out_override, resolved.run.out_dir);
    return run_train_into(resolved.run, resolved.canonical, dir);
  } catch (const ConfigError& error) {
    std::cerr << "config error: " << error.what() << '\n';
    return 2;
  } catch (const std::exception& error) {
    std::cerr << "runtime error: " << error.what() << '\n';
    return 1;
  }
}

int cmd_verify_theory(const std::string& config_path, const std::vector<std::string>& overrides,
                      const std::string& out_override) {
  try {
    const ResolvedConfig resolved = load_resolved(config_path, overrides);
    const RunConfig& run = resolved.run;
    const std::string dir = resolve_out_dir(out_override, run.out_dir);
    fs::create_directories(dir);
    write_manifest(dir, "verify-theory", run.seed, resolved.canonical,
                   {"sign_agreement.csv", "sign_agreement_summary.csv", "confidence_gap.csv"});

    SignAgreementConfig experiment;
    experiment.seed = run.seed;
    experiment.trials = resolved.trials;
    experiment.lr_grid = resolved.lr_grid;
    experiment.estimator = run.estimator;
    experiment.variant = run.variant;
    experiment.vocab = run.vocab;
    experiment.task = run.task;
    experiment.group_size = run.group_size;
    experiment.max_len = run.max_len;
    experiment.hidden_dim = run.hidden_dim;
    experiment.context_window = run.context_window;
    experiment.init_scale = run.init_scale;
    experiment.threads = run.threads;
    experiment.pretrain_steps = resolved.pretrain_steps;
    experiment.pretrain_lr = resolved.pretrain_lr;

    const SignAgreementResult result = sign_agreement_experiment(experiment);

    {
      std::ofstream out(fs::path(dir) / "sign_agreement.csv", std::ios::trunc);
      out << sign_agreement_csv_header() << '\n';
      for (const TrialOutcome& outcome : result.outcomes) {
        if (outcome.valid) out << sign_agreement_csv_row(outcome, run.estimator) << '\n';
      }
    }
    {
      std::ofstream out(fs::path(dir) / "sign_agreement_summary.csv", std::ios::trunc);
      out << sign_agreement_summary_csv_header() << '\n';
      for (const SignAgreementSummary& summary : result.summaries) {
        out << sign_agreement_summary_csv_row(summary, run.estimator) << '\n';
        std::cout << "lr=" << format_double(summary.lr)
                  << " condition=" << format_double(summary.frac_condition)
                  << " sign_agreement=" << format_double(summary.frac_sign_given_condition)
                  << " mean_ll=" << format_double(summary.mean_log_likelihood)
                  << " mean_baseline=" << format_double(summary.mean_baseline) << '\n';
      }
    }
    {
      const std::vector<ConfidenceGapRow> rows = confidence_gap_experiment(run);
      std::ofstream out(fs::path(dir) / "confidence_gap.csv", std::ios::trunc);
      out << confidence_gap_csv_header() << '\n';
      for (const ConfidenceGapRow& row : rows) out << confidence_gap_csv_row(row) << '\n';
    }

    // Gate: the sign law must hold in at least 99% of condition-satisfying
    // trials at the smallest learning rate on the grid.
    double smallest_lr = resolved.lr_grid.empty() ? 0.0 : resolved.lr_grid[0];
    double gate_fraction = 1.0;
    for (const SignAgreementSummary& summary : result.summaries) {
      if (summary.lr <= smallest_lr) {
        smallest_lr = summary.lr;
        gate_fraction =
            summary.condition_count > 0 ? summary.frac_sign_given_condition : 1.0;
      }
    }
    if (gate_fraction < 0.99) {
      std::cerr << "sign-agreement gate failed at lr=" << format_double(smallest_lr) << ": "
                << format_double(gate_fraction) << " < 0.99\n";
      return 1;
    }
    return 0;
  } catch (const ConfigError& error) {
    std::cerr << "config error: " << error.what() << '\n';
    return 2;
  } catch (const std::exception& error) {
    std::cerr << "runtime error: " << error.what() << '\n';
    return 1;
  }
}

int cmd_sweep_schedules(const std::string& config_path,
                        const std::vector<std::string>& overrides,
                        const std::string& out_override) {
  try {
    const ResolvedConfig resolved = load_resolved(config_path, overrides);
    const std::string dir = resolve_out_dir(out_override, resolved.run.out_dir);
    fs::create_directories(dir);

    const ScheduleFamily families[] = {ScheduleFamily::Constant, ScheduleFamily::Linear,
                                       ScheduleFamily::Cosine};
    std::vector<std::string> outputs{"summary.csv"};
    for (ScheduleFamily family : families) {
      for (std::uint64_t seed : resolved.sweep_seeds) {
        outputs.push_back(schedule_family_name(family) + "_seed" + std::to_string(seed) + "/");
      }
    }
    write_manifest(dir, "sweep-schedules", resolved.run.seed, resolved.canonical, outputs);

    std::ofstream summary(fs::path(dir) / "summary.csv", std::ios::trunc);
    summary << "family,seed,final_reward,final_entropy,late_entropy_variance\n";

    for (ScheduleFamily family : families) {
      for (std::uint64_t seed : resolved.sweep_seeds) {
        const std::string run_name =
            schedule_family_name(family) + "_seed" + std::to_string(seed);
        const std::string run_dir = (fs::path(dir) / run_name).string();

        ConfigMap canonical = resolved.canonical;
        canonical.set("schedule.family", schedule_family_name(family));
        canonical.set("run.seed", std::to_string(seed));
        ResolvedConfig run_resolved = resolve_config(canonical);
        RunConfig run = run_resolved.run;

        if (fs::exists(fs::path(run_dir) / "manifest.txt")) {
          std::cout << "skipping " << run_name << " (manifest exists)\n";
        } else {
          run_train_into(run, run_resolved.canonical, run_dir);
        }

        // Summarize from the run's metrics file so resumed sweeps report
        // previously finished runs too.
        std::ifstream metrics(fs::path(run_dir) / "metrics.csv");
        if (!metrics) throw TrainingAbort("missing metrics for " + run_name);
        std::string line;
        std::getline(metrics, line);  // header
        std::vector<double> rewards, entropies;
        while (std::getline(metrics, line)) {
          double reward = 0.0, entropy = 0.0;
          int step = 0;
          long long samples = 0;
          if (std::sscanf(line.c_str(), "%d,%lld,%lf,%lf", &step, &samples, &reward,
                          &entropy) == 4) {
            rewards.push_back(reward);
            entropies.push_back(entropy);
          }
        }
        if (rewards.empty()) throw TrainingAbort("empty metrics for " + run_name);
        const std::size_t late_start = entropies.size() - entropies.size() / 5;
        double mean = 0.0;
        for (std::size_t i = late_start; i < entropies.size(); ++i) mean += entropies[i];
        const std::size_t late_count = entropies.size() - late_start;
        mean /= static_cast<double>(late_count);
        double variance = 0.0;
        for (std::size_t i = late_start; i < entropies.size(); ++i) {
          variance += (entropies[i] - mean) * (entropies[i] - mean);
        }
        variance /= static_cast<double>(late_count);

        summary << schedule_family_name(family) << ',' << seed << ','
                << format_double(rewards.back()) << ',' << format_double(entropies.back())
                << ',' << format_double(variance) << '\n';
      }
    }
    return 0;
  } catch (const ConfigError& error) {
    std::cerr << "config error: " << error.what() << '\n';
    return 2;
  } catch (const std::exception& error) {
    std::cerr << "runtime error: " << error.what() << '\n';
    return 1;
  }
}

int cmd_eval(const EvalOptions& options) {
  try {
    const PolicyParameters params = load_checkpoint(options.checkpoint);

    TaskSpec task;
    if (options.task == "modular-sum") {
      task.kind = TaskKind::ModularSum;
    } else if (options.task == "parity") {
      task.kind = TaskKind::Parity;
    } else {
      throw ConfigError("unknown task '" + options.task + "'");
    }
    task.operand_count = options.operand_count;
    task.bit_count = options.bit_count;
    task.answer_length = options.answer_length;
    task.validate(params.vocab);

    const EvalResult result =
        evaluate_pass_at_k(params, task, options.prompts, options.k, options.temperature,
                           options.seed, 0, options.max_len, options.threads);

    EvalRow row{0, task_kind_name(task.kind), options.k, result.mean_at_k, result.pass_at_k};
    std::cout << "mean@" << options.k << " = " << format_double(result.mean_at_k) << '\n'
              << "pass@" << options.k << " = " << format_double(result.pass_at_k) << '\n';

    const std::string dir = resolve_out_dir(options.out_dir, "out");
    fs::create_directories(dir);
    const fs::path eval_path = fs::path(dir) / "eval.csv";
    const bool fresh = !fs::exists(eval_path);
    std::ofstream out(eval_path, std::ios::app);
    if (!out) throw ConfigError("cannot write eval.csv in " + dir);
    if (fresh) out << eval_csv_header() << '\n';
    out << eval_csv_row(row) << '\n';
    return 0;
  } catch (const ConfigError& error) {
    std::cerr << "config error: " << error.what() << '\n';
    return 2;
  } catch (const std::exception& error) {
    std::cerr << "runtime error: " << error.what() << '\n';
    return 1;
  }
}

}  // namespace entrosim
