#pragma once

#include <stdexcept>
#include <string>

namespace dualmae {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Wrong tensor/geometry dimensions.
struct ShapeError : Error {
  using Error::Error;
};

// Out-of-bounds token or element index.
struct IndexError : Error {
  using Error::Error;
};

// Invalid configuration value (bad ratio, cell does not tile the grid, ...).
struct ConfigError : Error {
  using Error::Error;
};

// API precondition broken by the caller (role mismatch, grid mismatch, ...).
struct ContractError : Error {
  using Error::Error;
};

// Runtime failure inside a training loop (non-finite gradients, ...).
struct TrainingError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace dualmae
