#pragma once

#include <stdexcept>
#include <string>

namespace fedsim {

// Invalid experiment setup: bad fleet spec, unknown config key, infeasible cluster.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unknown execution target, DVFS step, signal band or device.
class LookupError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Caller broke a precondition (negative time, length mismatch, K > N ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Local training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t device, const std::string& what)
      : std::runtime_error("device " + std::to_string(device) + ": " + what), device_(device) {}
  std::size_t device() const noexcept { return device_; }

 private:
  std::size_t device_;
};

// Exhaustive oracle search asked to enumerate too many combinations.
class InfeasibleInstance : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fedsim
