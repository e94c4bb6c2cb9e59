#pragma once

#include <stdexcept>
#include <string>

namespace stune {

// Thrown when an argument breaks an operation's precondition.
class ContractViolation : public std::invalid_argument {
public:
  explicit ContractViolation(const std::string& what)
      : std::invalid_argument(what) {}
};

namespace detail {

inline void require(bool ok, const std::string& message) {
  if (!ok) throw ContractViolation(message);
}

}  // namespace detail
}  // namespace stune
