#pragma once

// Subcommand implementations behind the CLI. Each resolves its inputs,
// writes a run manifest before any other output, and reports through exit
// codes: 0 ok, 1 runtime failure, 2 configuration error.

#include <string>
#include <vector>

namespace entrosim {

inline constexpr const char* kVersion = "0.1.0";

struct EvalOptions {
  std::string checkpoint;
  std::string task = "modular-sum";
  int operand_count = 2;
  int bit_count = 3;
  int answer_length = 1;
  int k = 32;
  double temperature = 0.6;
  int prompts = 64;
  std::uint64_t seed = 1;
  int max_len = 6;
  int threads = 0;
  std::string out_dir;  // empty: ENTROSIM_OUT or "out"
};

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& out_override);
int cmd_verify_theory(const std::string& config_path, const std::vector<std::string>& overrides,
                      const std::string& out_override);
int cmd_sweep_schedules(const std::string& config_path,
                        const std::vector<std::string>& overrides,
                        const std::string& out_override);
int cmd_eval(const EvalOptions& options);

}  // namespace entrosim
