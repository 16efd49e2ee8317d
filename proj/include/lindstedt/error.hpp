#pragma once

#include <stdexcept>
#include <string>

namespace lindstedt {

/// Malformed or inadmissible input (maps to CLI exit status 2).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical contract that should hold did not (maps to CLI exit status 1).
class ContractViolation : public std::runtime_error {
 public:
  ContractViolation(std::string invariant, const std::string& what)
      : std::runtime_error(invariant + ": " + what), invariant_(std::move(invariant)) {}

  const std::string& invariant() const noexcept { return invariant_; }

 private:
  std::string invariant_;
};

/// A search or enumeration would exceed its configured budget.
class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lindstedt
