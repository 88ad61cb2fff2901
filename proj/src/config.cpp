#include "entrosim/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "entrosim/errors.hpp"

namespace entrosim {

namespace {

std::string trim(const std::string& s) {
  std::size_t begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  std::size_t end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

// Every known key in canonical order, with its default ("" = required).
struct KeySpec {
  const char* key;
  const char* default_value;
};

const KeySpec kKeyTable[] = {
    {"task.kind", "modular-sum"},
    {"task.operand_count", "2"},
    {"task.bit_count", "3"},
    {"task.answer_length", "1"},
    {"policy.variant", "tabular"},
    {"policy.vocab", "16"},
    {"policy.eos", "auto"},
    {"policy.dim", "32"},
    {"policy.context_window", "2"},
    {"policy.init", "auto"},
    {"policy.init_scale", "0.1"},
    {"advantage.kind", "group-normalized"},
    {"controller.kind", "none"},
    {"controller.gamma", "10"},
    {"controller.beta", "0.01"},
    {"controller.eps_high", "0.28"},
    {"controller.clip_fraction", "0.02"},
    {"controller.lambda", "1"},
    {"controller.alpha_gain", "1"},
    {"schedule.family", "constant"},
    {"schedule.start", "0.6"},
    {"schedule.end", "0.2"},
    {"schedule.band_halfwidth", "0.05"},
    {"update.objective", "grpo-clipped"},
    {"update.lr", "0.001"},
    {"update.eps_low", "0.2"},
    {"update.eps_high", "0.2"},
    {"update.kl_coef", "0.001"},
    {"update.length_norm", "false"},
    {"run.seed", ""},
    {"run.total_samples", "512000"},
    {"run.prompts_per_step", "32"},
    {"run.group_size", "8"},
    {"run.max_len", "6"},
    {"run.eval_every", "0"},
    {"run.eval_prompts", "64"},
    {"run.eval_k", "32"},
    {"run.eval_temperature", "0.6"},
    {"run.checkpoint_every", "0"},
    {"run.threads", "0"},
    {"run.out_dir", "out"},
    {"run.trials", "1000"},
    {"run.pretrain_steps", "0"},
    {"run.pretrain_lr", "0.5"},
    {"run.lr_grid", "0.01,0.001,0.0001"},
    {"run.seeds", "1,2,3"},
};

bool known_key(const std::string& key) {
  for (const KeySpec& spec : kKeyTable) {
    if (key == spec.key) return true;
  }
  return false;
}

class Reader {
 public:
  explicit Reader(const ConfigMap& canonical) : canonical_(canonical) {}

  const std::string& raw(const std::string& key) const {
    const std::string* value = canonical_.find(key);
    if (value == nullptr) throw ConfigError("missing required key " + key);
    return *value;
  }

  long long integer(const std::string& key) const {
    const std::string& s = raw(key);
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(s, &pos);
      if (pos != s.size()) throw std::invalid_argument("");
      return v;
    } catch (...) {
      throw ConfigError("key " + key + ": expected integer, got '" + s + "'");
    }
  }

  std::uint64_t unsigned_integer(const std::string& key) const {
    const std::string& s = raw(key);
    try {
      std::size_t pos = 0;
      const std::uint64_t v = std::stoull(s, &pos);
      if (pos != s.size()) throw std::invalid_argument("");
      return v;
    } catch (...) {
      throw ConfigError("key " + key + ": expected unsigned integer, got '" + s + "'");
    }
  }

  double real(const std::string& key) const {
    const std::string& s = raw(key);
    try {
      std::size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument("");
      return v;
    } catch (...) {
      throw ConfigError("key " + key + ": expected number, got '" + s + "'");
    }
  }

  bool boolean(const std::string& key) const {
    const std::string& s = raw(key);
    if (s == "true") return true;
    if (s == "false") return false;
    throw ConfigError("key " + key + ": expected true or false, got '" + s + "'");
  }

 private:
  const ConfigMap& canonical_;
};

void require(bool condition, const std::string& message) {
  if (!condition) throw ConfigError(message);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> parts;
  std::string current;
  for (char c : value) {
    if (c == ',') {
      parts.push_back(trim(current));
      current.clear();
    } else {
      current += c;
    }
  }
  parts.push_back(trim(current));
  return parts;
}

}  // namespace

const std::string* ConfigMap::find(const std::string& key) const {
  for (const auto& [k, v] : entries) {
    if (k == key) return &v;
  }
  return nullptr;
}

void ConfigMap::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : entries) {
    if (k == key) {
      v = value;
      return;
    }
  }
  entries.emplace_back(key, value);
}

ConfigMap parse_config_text(const std::string& text) {
  ConfigMap config;
  std::istringstream in(text);
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_number) +
                        ": expected 'key = value', got '" + stripped + "'");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("config line " + std::to_string(line_number) + ": empty key");
    }
    config.set(key, value);
  }
  return config;
}

ConfigMap load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config_text(text.str());
}

void apply_overrides(ConfigMap& config, const std::vector<std::string>& overrides) {
  for (const std::string& entry : overrides) {
    const std::size_t eq = entry.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("override must be key=value, got '" + entry + "'");
    }
    config.set(trim(entry.substr(0, eq)), trim(entry.substr(eq + 1)));
  }
}

ResolvedConfig resolve_config(const ConfigMap& raw) {
  for (const auto& [key, value] : raw.entries) {
    if (!known_key(key)) throw ConfigError("unknown config key: " + key);
  }

  ResolvedConfig resolved;
  ConfigMap& canonical = resolved.canonical;
  for (const KeySpec& spec : kKeyTable) {
    const std::string* value = raw.find(spec.key);
    if (value != nullptr) {
      canonical.set(spec.key, *value);
    } else if (spec.default_value[0] != '\0' || std::string(spec.key) != "run.seed") {
      canonical.set(spec.key, spec.default_value);
    } else {
      throw ConfigError("missing required key run.seed");
    }
  }

  const Reader read(canonical);
  RunConfig& run = resolved.run;

  const std::string task_kind = read.raw("task.kind");
  if (task_kind == "modular-sum") {
    run.task.kind = TaskKind::ModularSum;
  } else if (task_kind == "parity") {
    run.task.kind = TaskKind::Parity;
  } else {
    throw ConfigError("key task.kind: unknown task '" + task_kind + "'");
  }
  run.task.operand_count = static_cast<int>(read.integer("task.operand_count"));
  run.task.bit_count = static_cast<int>(read.integer("task.bit_count"));
  run.task.answer_length = static_cast<int>(read.integer("task.answer_length"));
  require(run.task.operand_count >= 2, "key task.operand_count: must be >= 2");
  require(run.task.bit_count >= 1, "key task.bit_count: must be >= 1");
  require(run.task.answer_length >= 1, "key task.answer_length: must be >= 1");

  const std::string variant = read.raw("policy.variant");
  if (variant == "tabular") {
    run.variant = PolicyVariant::Tabular;
  } else if (variant == "mlp") {
    run.variant = PolicyVariant::Mlp;
  } else {
    throw ConfigError("key policy.variant: unknown variant '" + variant + "'");
  }
  run.vocab.size = static_cast<int>(read.integer("policy.vocab"));
  require(run.vocab.size >= 2, "key policy.vocab: must be >= 2");
  const std::string eos = read.raw("policy.eos");
  run.vocab.eos = eos == "auto" ? run.vocab.size - 1
                                : static_cast<int>(read.integer("policy.eos"));
  require(run.vocab.eos >= 0 && run.vocab.eos < run.vocab.size,
          "key policy.eos: must be in [0, vocab)");
  run.hidden_dim = static_cast<int>(read.integer("policy.dim"));
  require(run.hidden_dim >= 1, "key policy.dim: must be >= 1");
  run.context_window = static_cast<int>(read.integer("policy.context_window"));
  require(run.context_window >= 1, "key policy.context_window: must be >= 1");

  const std::string init = read.raw("policy.init");
  if (init == "auto") {
    run.init = InitKind::Auto;
  } else if (init == "zero") {
    run.init = InitKind::Zero;
  } else if (init == "gaussian") {
    run.init = InitKind::Gaussian;
  } else {
    throw ConfigError("key policy.init: unknown init '" + init + "'");
  }
  run.init_scale = read.real("policy.init_scale");
  require(run.init_scale >= 0.0, "key policy.init_scale: must be >= 0");

  const std::string estimator = read.raw("advantage.kind");
  if (estimator == "group-normalized") {
    run.estimator = EstimatorKind::GroupNormalized;
  } else if (estimator == "positive-only") {
    run.estimator = EstimatorKind::PositiveOnly;
  } else if (estimator == "negative-only") {
    run.estimator = EstimatorKind::NegativeOnly;
  } else {
    throw ConfigError("key advantage.kind: unknown estimator '" + estimator + "'");
  }

  const std::string controller = read.raw("controller.kind");
  if (controller == "none") {
    run.controller.kind = ControllerKind::None;
  } else if (controller == "entrocraft") {
    run.controller.kind = ControllerKind::Entrocraft;
  } else if (controller == "entropy-loss") {
    run.controller.kind = ControllerKind::EntropyLoss;
  } else if (controller == "clip-higher") {
    run.controller.kind = ControllerKind::ClipHigher;
  } else if (controller == "clip-cov") {
    run.controller.kind = ControllerKind::ClipCov;
  } else if (controller == "w-reinforce") {
    run.controller.kind = ControllerKind::WReinforce;
  } else if (controller == "entropic") {
    run.controller.kind = ControllerKind::Entropic;
  } else {
    throw ConfigError("key controller.kind: unknown controller '" + controller + "'");
  }
  run.controller.gamma = read.real("controller.gamma");
  require(run.controller.gamma > 0.0, "key controller.gamma: must be > 0");
  run.controller.beta = read.real("controller.beta");
  run.controller.eps_high = read.real("controller.eps_high");
  run.controller.clip_fraction = read.real("controller.clip_fraction");
  require(run.controller.clip_fraction >= 0.0 && run.controller.clip_fraction < 1.0,
          "key controller.clip_fraction: must be in [0, 1)");
  run.controller.lambda = read.real("controller.lambda");
  run.controller.alpha_gain = read.real("controller.alpha_gain");

  const std::string family = read.raw("schedule.family");
  if (family == "constant") {
    run.schedule.family = ScheduleFamily::Constant;
  } else if (family == "linear") {
    run.schedule.family = ScheduleFamily::Linear;
  } else if (family == "cosine") {
    run.schedule.family = ScheduleFamily::Cosine;
  } else {
    throw ConfigError("key schedule.family: unknown family '" + family + "'");
  }
  const double start_fraction = read.real("schedule.start");
  const double end_fraction = read.real("schedule.end");
  require(start_fraction >= 0.0 && start_fraction <= 1.0,
          "key schedule.start: must be a fraction of log|V| in [0, 1]");
  require(end_fraction >= 0.0 && end_fraction <= 1.0,
          "key schedule.end: must be a fraction of log|V| in [0, 1]");
  const double max_entropy = std::log(static_cast<double>(run.vocab.size));
  run.schedule.start_target = start_fraction * max_entropy;
  run.schedule.end_target = run.schedule.family == ScheduleFamily::Constant
                                ? run.schedule.start_target
                                : end_fraction * max_entropy;
  run.schedule.band_halfwidth = read.real("schedule.band_halfwidth");
  require(run.schedule.band_halfwidth > 0.0, "key schedule.band_halfwidth: must be > 0");

  const std::string objective = read.raw("update.objective");
  if (objective == "plain-pg") {
    run.update.objective = ObjectiveKind::PlainPG;
  } else if (objective == "grpo-clipped") {
    run.update.objective = ObjectiveKind::GrpoClipped;
  } else if (objective == "gspo-clipped") {
    run.update.objective = ObjectiveKind::GspoClipped;
  } else {
    throw ConfigError("key update.objective: unknown objective '" + objective + "'");
  }
  run.update.lr = read.real("update.lr");
  require(run.update.lr > 0.0, "key update.lr: must be > 0");
  run.update.eps_low = read.real("update.eps_low");
  run.update.eps_high = read.real("update.eps_high");
  require(run.update.eps_low > 0.0 && run.update.eps_low < 1.0,
          "key update.eps_low: must be in (0, 1)");
  require(run.update.eps_high > 0.0 && run.update.eps_high < 1.0,
          "key update.eps_high: must be in (0, 1)");
  run.update.kl_coef = read.real("update.kl_coef");
  require(run.update.kl_coef >= 0.0, "key update.kl_coef: must be >= 0");
  run.update.length_norm = read.boolean("update.length_norm");

  run.seed = read.unsigned_integer("run.seed");
  run.total_samples = read.integer("run.total_samples");
  run.prompts_per_step = static_cast<int>(read.integer("run.prompts_per_step"));
  run.group_size = static_cast<int>(read.integer("run.group_size"));
  run.max_len = static_cast<int>(read.integer("run.max_len"));
  require(run.prompts_per_step >= 1, "key run.prompts_per_step: must be >= 1");
  require(run.group_size >= 1, "key run.group_size: must be >= 1");
  if (run.estimator == EstimatorKind::GroupNormalized) {
    require(run.group_size >= 2, "key run.group_size: group-normalized advantage needs G >= 2");
  }
  require(run.max_len >= 1, "key run.max_len: must be >= 1");
  run.eval_every = static_cast<int>(read.integer("run.eval_every"));
  run.eval_prompts = static_cast<int>(read.integer("run.eval_prompts"));
  run.eval_k = static_cast<int>(read.integer("run.eval_k"));
  run.eval_temperature = read.real("run.eval_temperature");
  require(run.eval_every >= 0, "key run.eval_every: must be >= 0");
  require(run.eval_prompts >= 1, "key run.eval_prompts: must be >= 1");
  require(run.eval_k >= 1, "key run.eval_k: must be >= 1");
  require(run.eval_temperature > 0.0, "key run.eval_temperature: must be > 0");
  run.checkpoint_every = static_cast<int>(read.integer("run.checkpoint_every"));
  require(run.checkpoint_every >= 0, "key run.checkpoint_every: must be >= 0");
  run.threads = static_cast<int>(read.integer("run.threads"));
  require(run.threads >= 0, "key run.threads: must be >= 0");
  run.out_dir = read.raw("run.out_dir");

  run.task.validate(run.vocab);
  run.steps();  // validates divisibility

  resolved.trials = static_cast<int>(read.integer("run.trials"));
  require(resolved.trials >= 1, "key run.trials: must be >= 1");
  resolved.pretrain_steps = static_cast<int>(read.integer("run.pretrain_steps"));
  require(resolved.pretrain_steps >= 0, "key run.pretrain_steps: must be >= 0");
  resolved.pretrain_lr = read.real("run.pretrain_lr");
  require(resolved.pretrain_lr > 0.0, "key run.pretrain_lr: must be > 0");
  for (const std::string& part : split_list(read.raw("run.lr_grid"))) {
    try {
      resolved.lr_grid.push_back(std::stod(part));
    } catch (...) {
      throw ConfigError("key run.lr_grid: bad entry '" + part + "'");
    }
    require(resolved.lr_grid.back() >= 0.0, "key run.lr_grid: entries must be >= 0");
  }
  for (const std::string& part : split_list(read.raw("run.seeds"))) {
    try {
      resolved.sweep_seeds.push_back(std::stoull(part));
    } catch (...) {
      throw ConfigError("key run.seeds: bad entry '" + part + "'");
    }
  }
  return resolved;
}

std::string print_config(const ConfigMap& canonical) {
  std::ostringstream out;
  for (const auto& [key, value] : canonical.entries) {
    out << key << " = " << value << '\n';
  }
  return out.str();
}

}  // namespace entrosim
