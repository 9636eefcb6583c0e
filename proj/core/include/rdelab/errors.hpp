#pragma once

#include <stdexcept>
#include <string>

namespace rdelab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An offspring law violates a standing assumption (mass at zero, total
/// mass, no genuine branching, malformed parameters).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A quantity was requested where it is undefined, e.g. the derivative of a
/// thinned generating function at its square-root singularity.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// No admissible root exists in the bracket demanded by a moment recursion.
class FeasibilityError : public Error {
 public:
  FeasibilityError(int order, const std::string& what)
      : Error(what), order_(order) {}

  /// Moment order at which the recursion ran out of feasible roots.
  int order() const noexcept { return order_; }

 private:
  int order_;
};

/// A sampled tree or workload exceeded a configured cap.
class ResourceError : public Error {
 public:
  using Error::Error;
};

}  // namespace rdelab
