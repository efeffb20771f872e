#ifndef LRP_ERRORS_HPP
#define LRP_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace lrp {

// Argument outside an operation's domain (k <= 0, vertex outside a system, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Invalid parameters, configs or input files. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Leak or discard thresholds exceeded. Maps to CLI exit code 3.
class NumericValidityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A checked mathematical invariant failed. Maps to CLI exit code 1.
class InvariantViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lrp

#endif  // LRP_ERRORS_HPP
