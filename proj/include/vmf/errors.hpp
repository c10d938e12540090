#ifndef VMF_ERRORS_HPP
#define VMF_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace vmf {

/// Operands of a tensor op have incompatible shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation produced NaN or infinity.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file (bad JSON, bad CSV, wrong field types).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Well-formed input that violates a domain invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace vmf

#endif  // VMF_ERRORS_HPP
