#pragma once

// Parameter checkpoints: a one-line textual header followed by the flat
// parameter array as little-endian 64-bit floats.
//
//   entrosim-ckpt v1 variant=<tabular|mlp> vocab=<n> dim=<d>
//
// For the tabular variant `dim` is the context window K (the only structural
// knob besides the vocabulary); for the mlp it is the hidden width d.

#include <string>

#include "entrosim/policy.hpp"

namespace entrosim {

void save_checkpoint(const PolicyParameters& params, const std::string& path);

/// Loads and validates a checkpoint. Throws ConfigError with a byte-offset
/// diagnostic on truncation and on any header mismatch.
PolicyParameters load_checkpoint(const std::string& path);

}  // namespace entrosim
