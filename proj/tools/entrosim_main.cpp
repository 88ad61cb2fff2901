// entrosim: a desk-scale laboratory for entropy dynamics in policy-gradient
// RL, with a rejection-sampling entropy controller and schedulable targets.

#include <string>
#include <vector>

#include "CLI11.hpp"
#include "entrosim/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"entrosim: entropy-controlled policy-gradient RL on synthetic tasks"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::vector<std::string> overrides;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("-c,--config", config_path, "config file (section.key = value lines)")
        ->required();
    cmd->add_option("--override", overrides, "override a config key, e.g. schedule.family=cosine");
    cmd->add_option("-o,--out", out_dir, "output directory (overrides ENTROSIM_OUT and config)");
  };

  CLI::App* train = app.add_subcommand("train", "run a training loop, writing metrics and checkpoints");
  add_common(train);

  CLI::App* verify = app.add_subcommand(
      "verify-theory", "measure the advantage/entropy sign law over an lr grid");
  add_common(verify);

  CLI::App* sweep = app.add_subcommand(
      "sweep-schedules", "train {constant, linear, cosine} schedules across seeds");
  add_common(sweep);

  entrosim::EvalOptions eval_options;
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint with pass@K sampling");
  eval->add_option("--checkpoint", eval_options.checkpoint, "checkpoint file")->required();
  eval->add_option("--task", eval_options.task, "task kind: modular-sum or parity");
  eval->add_option("--operand-count", eval_options.operand_count, "modular-sum operand count");
  eval->add_option("--bit-count", eval_options.bit_count, "parity bit count");
  eval->add_option("--answer-length", eval_options.answer_length, "answer tokens before eos");
  eval->add_option("-k,--k", eval_options.k, "samples per prompt (default 32)");
  eval->add_option("-t,--temperature", eval_options.temperature, "sampling temperature (default 0.6)");
  eval->add_option("--prompts", eval_options.prompts, "number of evaluation prompts");
  eval->add_option("--seed", eval_options.seed, "evaluation seed");
  eval->add_option("--max-len", eval_options.max_len, "maximum completion length");
  eval->add_option("--threads", eval_options.threads, "worker threads (1 = serial)");
  eval->add_option("-o,--out", eval_options.out_dir, "output directory for eval.csv");

  CLI11_PARSE(app, argc, argv);

  if (train->parsed()) return entrosim::cmd_train(config_path, overrides, out_dir);
  if (verify->parsed()) return entrosim::cmd_verify_theory(config_path, overrides, out_dir);
  if (sweep->parsed()) return entrosim::cmd_sweep_schedules(config_path, overrides, out_dir);
  if (eval->parsed()) return entrosim::cmd_eval(eval_options);
  return 2;
}
