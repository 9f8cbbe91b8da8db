#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace smm {

/// Invalid or inconsistent user-facing configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Field/operator shape mismatch.
class DimensionError : public std::invalid_argument {
public:
  explicit DimensionError(const std::string& what) : std::invalid_argument(what) {}
};

/// Linear-algebra failure (singular solve, residual out of tolerance).
class NumericalError : public std::runtime_error {
public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Non-finite or exploding state detected by a stepper (CLI exit code 3).
class BlowUpError : public std::runtime_error {
public:
  BlowUpError(const std::string& what, std::uint64_t step)
      : std::runtime_error(what + " at step " + std::to_string(step)), step_(step) {}
  std::uint64_t step() const { return step_; }

private:
  std::uint64_t step_;
};

}  // namespace smm
