#pragma once

#include <stdexcept>
#include <string>

namespace phaselab {

/// Base class for all errors raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The conditional state has zero total weight; the requested history is
/// impossible (e.g. a point base hit by an exactly antipodal detection).
struct AnnihilatedDistribution : Error {
  AnnihilatedDistribution() : Error("distribution annihilated") {}
};

/// The Fock-space truncation cannot hold the requested Poisson tail mass.
struct TruncationError : Error {
  TruncationError() : Error("insufficient N_max") {}
};

/// A partition enumeration would exceed the configured composition budget.
struct EnumerationBudgetExceeded : Error {
  explicit EnumerationBudgetExceeded(const std::string& what) : Error(what) {}
};

/// Invalid run configuration (bad value, missing field, unknown key).
struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(what) {}
};

}  // namespace phaselab
