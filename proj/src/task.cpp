#include "entrosim/task.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace entrosim {

namespace {

// Big-endian base-|V| digits of value, answer_length of them.
std::vector<int> encode_answer(long long value, int answer_length, int vocab_size) {
  std::vector<int> digits(answer_length, 0);
  for (int i = answer_length - 1; i >= 0; --i) {
    digits[i] = static_cast<int>(value % vocab_size);
    value /= vocab_size;
  }
  return digits;
}

bool contains_eos(const std::vector<int>& tokens, int eos) {
  return std::find(tokens.begin(), tokens.end(), eos) != tokens.end();
}

}  // namespace

void TaskSpec::validate(const Vocabulary& vocab) const {
  if (answer_length < 1) throw std::invalid_argument("task answer_length must be >= 1");
  switch (kind) {
    case TaskKind::ModularSum:
      if (operand_count < 2) throw std::invalid_argument("modular-sum needs operand_count >= 2");
      break;
    case TaskKind::Parity:
      if (bit_count < 1) throw std::invalid_argument("parity needs bit_count >= 1");
      if (vocab.eos <= 1) {
        throw std::invalid_argument("parity task needs eos id outside {0,1}");
      }
      break;
  }
}

Prompt generate_prompt(const TaskSpec& task, const Vocabulary& vocab, RngStream& stream) {
  Prompt prompt;
  if (task.kind == TaskKind::ModularSum) {
    // Resample until no answer digit equals eos; keeps the before-eos
    // comparison in verify() unambiguous.
    long long modulus = 1;
    for (int i = 0; i < task.answer_length; ++i) modulus *= vocab.size;
    while (true) {
      prompt.tokens.clear();
      long long sum = 0;
      for (int i = 0; i < task.operand_count; ++i) {
        const int operand = static_cast<int>(stream.next_below(static_cast<std::uint32_t>(vocab.size)));
        prompt.tokens.push_back(operand);
        sum += operand;
      }
      std::vector<int> answer = encode_answer(sum % modulus, task.answer_length, vocab.size);
      if (!contains_eos(answer, vocab.eos)) {
        prompt.ground_truth = std::move(answer);
        break;
      }
    }
  } else {
    prompt.tokens.clear();
    int parity = 0;
    for (int i = 0; i < task.bit_count; ++i) {
      const int bit = static_cast<int>(stream.next_below(2));
      prompt.tokens.push_back(bit);
      parity ^= bit;
    }
    prompt.ground_truth = encode_answer(parity, task.answer_length, vocab.size);
  }
  prompt.ground_truth.push_back(vocab.eos);
  return prompt;
}

double verify(const Prompt& prompt, std::span<const int> completion, const Vocabulary& vocab) {
  auto body_end = [&](std::span<const int> seq) {
    std::size_t n = 0;
    while (n < seq.size() && seq[n] != vocab.eos) ++n;
    return n;
  };
  const std::size_t truth_len = body_end(prompt.ground_truth);
  const std::size_t body_len = body_end(completion);
  if (body_len != truth_len) return 0.0;
  for (std::size_t i = 0; i < truth_len; ++i) {
    if (completion[i] != prompt.ground_truth[i]) return 0.0;
  }
  return 1.0;
}

Group rollout_group(const PolicyParameters& sampler, const Prompt& prompt, int group_size,
                    int max_len, double temperature, std::uint64_t stream_key) {
  if (group_size < 1) throw std::invalid_argument("group size must be >= 1");
  if (max_len < 1) throw std::invalid_argument("max_len must be >= 1");
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be > 0");

  Group group;
  group.prompt = prompt;
  group.rollouts.resize(group_size);

  const std::span<const int> prompt_span(prompt.tokens);
  for (int i = 0; i < group_size; ++i) {
    RngStream stream(detail::mix64(stream_key ^ static_cast<std::uint64_t>(i)));
    Rollout& r = group.rollouts[i];
    r.prompt_index = 0;

    for (int t = 0; t < max_len; ++t) {
      const Context ctx{prompt_span, std::span<const int>(r.y)};
      const std::vector<double> logits = forward_logits(sampler, ctx);
      const std::vector<double> dist = softmax(logits);

      std::vector<double> sample_dist;
      if (temperature == 1.0) {
        sample_dist = dist;
      } else {
        std::vector<double> scaled(logits.size());
        for (std::size_t k = 0; k < logits.size(); ++k) scaled[k] = logits[k] / temperature;
        sample_dist = softmax(scaled);
      }

      const double u = stream.next_double();
      double cum = 0.0;
      int token = static_cast<int>(sample_dist.size()) - 1;
      for (std::size_t k = 0; k < sample_dist.size(); ++k) {
        cum += sample_dist[k];
        if (u < cum) {
          token = static_cast<int>(k);
          break;
        }
      }

      r.step_dists.push_back(dist);
      r.y.push_back(token);
      r.log_likelihood += floored_log(dist[token]);
      if (token == sampler.vocab.eos) break;
    }
    r.reward = verify(prompt, r.y, sampler.vocab);
  }

  double first = group.rollouts[0].reward;
  group.degenerate = std::all_of(group.rollouts.begin(), group.rollouts.end(),
                                 [&](const Rollout& r) { return r.reward == first; });
  return group;
}

std::string task_kind_name(TaskKind kind) {
  return kind == TaskKind::ModularSum ? "modular-sum" : "parity";
}

}  // namespace entrosim
