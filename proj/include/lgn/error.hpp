#pragma once

#include <stdexcept>
#include <string>

namespace lgn {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad user configuration (CLI exit code 2).
struct ConfigError : Error {
  using Error::Error;
};

// Malformed or missing data: IDX files, netlists, checkpoints (CLI exit code 3).
struct DataError : Error {
  using Error::Error;
};

// Dimension mismatch between network, dataset, or batch.
struct ShapeError : Error {
  using Error::Error;
};

// Non-finite values during training (CLI exit code 4).
struct NumericError : Error {
  using Error::Error;
};

}  // namespace lgn
