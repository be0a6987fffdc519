#pragma once

#include <stdexcept>

namespace pulseseg {

// Bad configuration (invalid key, invalid value, unusable combination).
// The CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace pulseseg
