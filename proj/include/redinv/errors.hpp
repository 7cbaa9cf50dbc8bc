#pragma once

#include <stdexcept>
#include <string>

namespace redinv {

// Base for all failures raised by the library. `where` identifies the
// operation ("module.op") so callers (notably the CLI) can report it.
class Error : public std::runtime_error {
public:
  Error(std::string where, const std::string& what)
      : std::runtime_error(where + ": " + what), where_(std::move(where)) {}
  const std::string& where() const noexcept { return where_; }

private:
  std::string where_;
};

// Bad arguments: dimension mismatches, out-of-range sizes, empty inputs.
struct InvalidInputError : Error {
  using Error::Error;
};

// A basis column became numerically dependent on the previous ones.
struct RankError : Error {
  using Error::Error;
};

// A matrix that must be invertible / SPD is numerically singular.
struct SingularError : Error {
  using Error::Error;
};

// Geometry outside the computational domain (sensor locations etc.).
struct DomainError : Error {
  using Error::Error;
};

// Diffusion field not uniformly positive over the parameter box.
struct CoercivityError : Error {
  using Error::Error;
};

// Inf-sup constant too small for a stable fit.
struct StabilityError : Error {
  using Error::Error;
};

// Nearly dependent sensor functionals.
struct ConditioningError : Error {
  using Error::Error;
};

// Refinement would descend below the training-grid resolution.
struct StarvationError : Error {
  using Error::Error;
};

}  // namespace redinv
