#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace storage_dr {

/// Bad parameters, scenario files or CLI input. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-slot program has no feasible point (e.g. residual load above c_grid).
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Requested work exceeds the configured budget (grid oracles, state spaces).
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A sample-path guarantee was observed to fail. Maps to CLI exit code 3.
class TheoremViolation : public std::runtime_error {
 public:
  TheoremViolation(std::size_t slot, const std::string& what)
      : std::runtime_error("slot " + std::to_string(slot) + ": " + what), slot_(slot) {}

  std::size_t slot() const noexcept { return slot_; }

 private:
  std::size_t slot_;
};

}  // namespace storage_dr
