#pragma once

#include <stdexcept>
#include <string>

namespace entrosim {

// Bad configuration, bad checkpoint, unknown keys. CLI maps this to exit 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite training state or other mid-run failure. CLI maps this to exit 1.
struct TrainingAbort : std::runtime_error {
  explicit TrainingAbort(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace entrosim
