#pragma once

// Line-oriented run configuration: `section.key = value` pairs with '#'
// comments. Unknown keys are rejected; every key except run.seed has a
// documented default. Schedule targets are given as fractions of log|V| and
// converted to nats at resolution.

#include <cstdint>
#include <string>
#include <vector>

#include "entrosim/experiments.hpp"
#include "entrosim/trainer.hpp"

namespace entrosim {

struct ConfigMap {
  std::vector<std::pair<std::string, std::string>> entries;  // first-seen order

  const std::string* find(const std::string& key) const;
  void set(const std::string& key, const std::string& value);  // replace or append
};

/// Parses config text; malformed lines raise ConfigError with line numbers.
ConfigMap parse_config_text(const std::string& text);
ConfigMap load_config_file(const std::string& path);

/// Applies `key=value` strings on top of a parsed file.
void apply_overrides(ConfigMap& config, const std::vector<std::string>& overrides);

struct ResolvedConfig {
  RunConfig run;
  int trials = 1000;                        // run.trials (verify-theory)
  int pretrain_steps = 0;                   // run.pretrain_steps
  double pretrain_lr = 0.5;                 // run.pretrain_lr
  std::vector<double> lr_grid;              // run.lr_grid
  std::vector<std::uint64_t> sweep_seeds;   // run.seeds (sweep-schedules)
  ConfigMap canonical;                      // every key, canonical order, raw values
};

/// Validates and types a parsed config. Rejects unknown keys, missing
/// run.seed, and out-of-range values, always naming the key.
ResolvedConfig resolve_config(const ConfigMap& raw);

/// Canonical text form; parse(print(resolved)) resolves identically.
std::string print_config(const ConfigMap& canonical);

}  // namespace entrosim
