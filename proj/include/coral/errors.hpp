#pragma once

#include <stdexcept>

namespace coral {

// Bad input files: malformed rows, unknown ids, schema violations.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad settings: unknown config keys, shape mismatches, invalid policies.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite losses or gradients.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace coral
