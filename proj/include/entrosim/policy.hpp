#pragma once

// Autoregressive softmax policies over a small vocabulary with exact
// log-probability gradients.
//
// Two variants share one flat parameter vector:
//  - tabular: a logit table indexed by a hash of the last-K context tokens.
//    Logits ARE parameters, the textbook tabular-softmax setting.
//  - mlp: mean token embedding -> tanh hidden layer -> linear logits, the
//    smallest policy whose logits are a nonlinear function of the parameters.
//
// All operations are pure; updates produce a new parameter value.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "entrosim/rng.hpp"
#include "entrosim/vocab.hpp"

namespace entrosim {

enum class PolicyVariant { Tabular, Mlp };

// Flat layouts:
//   tabular: row-major logit table, rows indexed by tabular_row_index.
//   mlp:     [ E (V*d) | W1 (d*d) | b1 (d) | W2 (d*V) | b2 (V) ], where
//            x = mean embedding of the context tokens,
//            h_j = tanh(b1_j + sum_i x_i W1[i*d+j]),
//            z_k = b2_k + sum_j h_j W2[j*V+k].
struct PolicyParameters {
  PolicyVariant variant = PolicyVariant::Tabular;
  Vocabulary vocab;
  int context_window = 2;  // tabular: K tokens hashed into the row index
  int hidden_dim = 32;     // mlp: embedding and hidden width d
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
};

/// Rows in the tabular logit table: (|V|+1)^K, one per distinct window
/// (shorter-than-K windows included via an absent-token code).
std::size_t tabular_row_count(const Vocabulary& vocab, int context_window);

/// Row index of a context's last-K window. Total and collision-free.
std::size_t tabular_row_index(const PolicyParameters& params, const Context& ctx);

PolicyParameters make_tabular_policy(const Vocabulary& vocab, int context_window = 2);
PolicyParameters make_mlp_policy(const Vocabulary& vocab, int hidden_dim = 32,
                                 int context_window = 2);

/// Fills parameters with N(0, scale^2) draws from the stream.
void init_gaussian(PolicyParameters& params, double scale, RngStream& stream);

/// Raw logits for the next token. Throws if any logit is non-finite,
/// naming the parameter block that produced it.
std::vector<double> forward_logits(const PolicyParameters& params, const Context& ctx);

/// Softmax next-token distribution; deterministic function of (params, ctx).
std::vector<double> forward_dist(const PolicyParameters& params, const Context& ctx);

/// log pi(y | prompt) = sum_t log p_t[y_t], with floored per-step logs.
double sequence_log_likelihood(const PolicyParameters& params,
                               std::span<const int> prompt, std::span<const int> y);

/// Exact gradient of sequence_log_likelihood w.r.t. the flat parameters.
std::vector<double> logprob_gradient(const PolicyParameters& params,
                                     std::span<const int> prompt, std::span<const int> y);

/// Adds the pullback of d(objective)/d(logits) at one context into grad.
/// The building block for every analytic gradient in the update engine.
void accumulate_logit_gradient(const PolicyParameters& params, const Context& ctx,
                               std::span<const double> dlogits, std::vector<double>& grad);

/// params + lr * grad as a new value; inputs untouched. Throws on a
/// non-finite result.
PolicyParameters apply_update(const PolicyParameters& params,
                              std::span<const double> grad, double lr);

/// Teacher-forced per-step distributions along a fixed sequence.
std::vector<std::vector<double>> teacher_forced_dists(const PolicyParameters& params,
                                                      std::span<const int> prompt,
                                                      std::span<const int> y);

/// Stable softmax of a logit vector.
std::vector<double> softmax(std::span<const double> logits);

}  // namespace entrosim
