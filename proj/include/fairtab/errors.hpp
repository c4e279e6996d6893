#pragma once

#include <stdexcept>
#include <string>

namespace fairtab {

// Shape or rank violation in a tensor op.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// API contract violation (e.g. backward on a non-scalar loss).
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

// Invalid configuration file or flag combination.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input data (CSV cell, schema mismatch, unknown category).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Value outside a function's mathematical domain.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Non-finite loss during training.
struct DivergenceError : std::runtime_error {
  DivergenceError(std::size_t epoch, std::size_t batch, const std::string& what)
      : std::runtime_error(what), epoch(epoch), batch(batch) {}
  std::size_t epoch;
  std::size_t batch;
};

}  // namespace fairtab
