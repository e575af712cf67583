#pragma once

#include <stdexcept>
#include <string>

namespace fermi {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of a scoring formula.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct LookupError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

struct KeyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A secure-aggregation round cannot complete; no partial aggregate is released.
struct RoundAborted : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainingFault : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace fermi
