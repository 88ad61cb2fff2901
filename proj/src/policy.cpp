#include "entrosim/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "entrosim/errors.hpp"

namespace entrosim {

namespace {

// Flat layout of the mlp variant:
//   [ E (V*d) | W1 (d*d) | b1 (d) | W2 (d*V) | b2 (V) ]
struct MlpLayout {
  std::size_t emb, w1, b1, w2, b2, total;
};

MlpLayout mlp_layout(int vocab_size, int d) {
  MlpLayout l{};
  const std::size_t v = static_cast<std::size_t>(vocab_size);
  const std::size_t dd = static_cast<std::size_t>(d);
  l.emb = 0;
  l.w1 = l.emb + v * dd;
  l.b1 = l.w1 + dd * dd;
  l.w2 = l.b1 + dd;
  l.b2 = l.w2 + dd * v;
  l.total = l.b2 + v;
  return l;
}

// Mean embedding of the full context (prompt then prefix); zero if empty.
void context_embedding(const PolicyParameters& p, const Context& ctx, double* x) {
  const int d = p.hidden_dim;
  std::fill(x, x + d, 0.0);
  const std::size_t n = ctx.length();
  if (n == 0) return;
  const double* emb = p.values.data();  // layout starts at E
  auto add = [&](int tok) {
    const double* row = emb + static_cast<std::size_t>(tok) * d;
    for (int j = 0; j < d; ++j) x[j] += row[j];
  };
  for (int tok : ctx.prompt) add(tok);
  for (int tok : ctx.generated) add(tok);
  const double inv = 1.0 / static_cast<double>(n);
  for (int j = 0; j < d; ++j) x[j] *= inv;
}

void mlp_forward(const PolicyParameters& p, const Context& ctx,
                 std::vector<double>& x, std::vector<double>& h,
                 std::vector<double>& logits) {
  const int d = p.hidden_dim;
  const int v = p.vocab.size;
  const MlpLayout l = mlp_layout(v, d);
  const double* w = p.values.data();

  x.assign(d, 0.0);
  context_embedding(p, ctx, x.data());

  h.assign(d, 0.0);
  for (int j = 0; j < d; ++j) {
    double acc = w[l.b1 + j];
    for (int i = 0; i < d; ++i) acc += x[i] * w[l.w1 + static_cast<std::size_t>(i) * d + j];
    h[j] = std::tanh(acc);
  }

  logits.assign(v, 0.0);
  for (int k = 0; k < v; ++k) {
    double acc = w[l.b2 + k];
    for (int j = 0; j < d; ++j) acc += h[j] * w[l.w2 + static_cast<std::size_t>(j) * v + k];
    logits[k] = acc;
  }
}

void check_finite_logits(const std::vector<double>& logits, const char* block) {
  for (double z : logits) {
    if (!std::isfinite(z)) {
      throw std::runtime_error(std::string("non-finite logit in parameter block: ") + block);
    }
  }
}

}  // namespace

std::size_t tabular_row_count(const Vocabulary& vocab, int context_window) {
  std::size_t rows = 1;
  for (int i = 0; i < context_window; ++i) rows *= static_cast<std::size_t>(vocab.size + 1);
  return rows;
}

std::size_t tabular_row_index(const PolicyParameters& params, const Context& ctx) {
  const int k = params.context_window;
  const std::size_t n = ctx.length();
  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), n);
  // Oldest-to-newest over the last `take` tokens; code 0 marks an absent slot.
  std::size_t idx = 0;
  const std::size_t base = static_cast<std::size_t>(params.vocab.size + 1);
  auto token_at = [&](std::size_t i) {
    return i < ctx.prompt.size() ? ctx.prompt[i] : ctx.generated[i - ctx.prompt.size()];
  };
  for (std::size_t i = n - take; i < n; ++i) {
    idx = idx * base + static_cast<std::size_t>(token_at(i) + 1);
  }
  return idx;
}

PolicyParameters make_tabular_policy(const Vocabulary& vocab, int context_window) {
  vocab.validate();
  if (context_window < 1) throw std::invalid_argument("context window must be >= 1");
  PolicyParameters p;
  p.variant = PolicyVariant::Tabular;
  p.vocab = vocab;
  p.context_window = context_window;
  p.hidden_dim = 0;
  p.values.assign(tabular_row_count(vocab, context_window) * vocab.size, 0.0);
  return p;
}

PolicyParameters make_mlp_policy(const Vocabulary& vocab, int hidden_dim, int context_window) {
  vocab.validate();
  if (hidden_dim < 1) throw std::invalid_argument("hidden dim must be >= 1");
  PolicyParameters p;
  p.variant = PolicyVariant::Mlp;
  p.vocab = vocab;
  p.context_window = context_window;
  p.hidden_dim = hidden_dim;
  p.values.assign(mlp_layout(vocab.size, hidden_dim).total, 0.0);
  return p;
}

void init_gaussian(PolicyParameters& params, double scale, RngStream& stream) {
  for (double& v : params.values) v = scale * stream.next_gaussian();
}

std::vector<double> softmax(std::span<const double> logits) {
  double zmax = logits[0];
  for (double z : logits) zmax = std::max(zmax, z);
  std::vector<double> p(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - zmax);
    total += p[i];
  }
  const double inv = 1.0 / total;
  for (double& x : p) x *= inv;
  return p;
}

std::vector<double> forward_logits(const PolicyParameters& params, const Context& ctx) {
  check_tokens(ctx.prompt, params.vocab);
  check_tokens(ctx.generated, params.vocab);
  if (params.variant == PolicyVariant::Tabular) {
    const std::size_t row = tabular_row_index(params, ctx);
    const std::size_t v = static_cast<std::size_t>(params.vocab.size);
    std::vector<double> logits(params.values.begin() + row * v,
                               params.values.begin() + (row + 1) * v);
    check_finite_logits(logits, "tabular logit table");
    return logits;
  }
  std::vector<double> x, h, logits;
  mlp_forward(params, ctx, x, h, logits);
  check_finite_logits(logits, "mlp output layer");
  return logits;
}

std::vector<double> forward_dist(const PolicyParameters& params, const Context& ctx) {
  return softmax(forward_logits(params, ctx));
}

double sequence_log_likelihood(const PolicyParameters& params,
                               std::span<const int> prompt, std::span<const int> y) {
  if (y.empty()) throw std::invalid_argument("empty sequence");
  check_tokens(y, params.vocab);
  double total = 0.0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    const Context ctx{prompt, y.subspan(0, t)};
    const std::vector<double> p = forward_dist(params, ctx);
    total += floored_log(p[y[t]]);
  }
  return total;
}

std::vector<std::vector<double>> teacher_forced_dists(const PolicyParameters& params,
                                                      std::span<const int> prompt,
                                                      std::span<const int> y) {
  std::vector<std::vector<double>> dists;
  dists.reserve(y.size());
  for (std::size_t t = 0; t < y.size(); ++t) {
    dists.push_back(forward_dist(params, Context{prompt, y.subspan(0, t)}));
  }
  return dists;
}

void accumulate_logit_gradient(const PolicyParameters& params, const Context& ctx,
                               std::span<const double> dlogits, std::vector<double>& grad) {
  const int v = params.vocab.size;
  if (params.variant == PolicyVariant::Tabular) {
    const std::size_t row = tabular_row_index(params, ctx);
    double* g = grad.data() + row * static_cast<std::size_t>(v);
    for (int i = 0; i < v; ++i) g[i] += dlogits[i];
    return;
  }

  const int d = params.hidden_dim;
  const MlpLayout l = mlp_layout(v, d);
  const double* w = params.values.data();
  std::vector<double> x, h, logits;
  mlp_forward(params, ctx, x, h, logits);

  std::vector<double> dpre(d), dx(d);
  for (int k = 0; k < v; ++k) grad[l.b2 + k] += dlogits[k];
  for (int j = 0; j < d; ++j) {
    double acc = 0.0;
    for (int k = 0; k < v; ++k) {
      grad[l.w2 + static_cast<std::size_t>(j) * v + k] += h[j] * dlogits[k];
      acc += w[l.w2 + static_cast<std::size_t>(j) * v + k] * dlogits[k];
    }
    dpre[j] = (1.0 - h[j] * h[j]) * acc;
    grad[l.b1 + j] += dpre[j];
  }
  for (int i = 0; i < d; ++i) {
    double acc = 0.0;
    for (int j = 0; j < d; ++j) {
      grad[l.w1 + static_cast<std::size_t>(i) * d + j] += x[i] * dpre[j];
      acc += w[l.w1 + static_cast<std::size_t>(i) * d + j] * dpre[j];
    }
    dx[i] = acc;
  }

  const std::size_t n = ctx.length();
  if (n > 0) {
    const double inv = 1.0 / static_cast<double>(n);
    auto scatter = [&](int tok) {
      double* g = grad.data() + l.emb + static_cast<std::size_t>(tok) * d;
      for (int i = 0; i < d; ++i) g[i] += dx[i] * inv;
    };
    for (int tok : ctx.prompt) scatter(tok);
    for (int tok : ctx.generated) scatter(tok);
  }
}

std::vector<double> logprob_gradient(const PolicyParameters& params,
                                     std::span<const int> prompt, std::span<const int> y) {
  if (y.empty()) throw std::invalid_argument("empty sequence");
  check_tokens(y, params.vocab);
  std::vector<double> grad(params.values.size(), 0.0);
  const int v = params.vocab.size;
  std::vector<double> dlogits(v);

  for (std::size_t t = 0; t < y.size(); ++t) {
    const Context ctx{prompt, y.subspan(0, t)};
    const std::vector<double> p = forward_dist(params, ctx);
    // d log p[y_t] / d logits = onehot(y_t) - p
    for (int i = 0; i < v; ++i) dlogits[i] = -p[i];
    dlogits[y[t]] += 1.0;
    accumulate_logit_gradient(params, ctx, dlogits, grad);
  }
  return grad;
}

PolicyParameters apply_update(const PolicyParameters& params,
                              std::span<const double> grad, double lr) {
  if (grad.size() != params.values.size()) {
    throw std::invalid_argument("gradient length does not match parameter count");
  }
  PolicyParameters out = params;
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    out.values[i] += lr * grad[i];
    if (!std::isfinite(out.values[i])) {
      throw TrainingAbort("non-finite parameter after update");
    }
  }
  return out;
}

}  // namespace entrosim
