#ifndef PIPF_ERRORS_HPP
#define PIPF_ERRORS_HPP

#include <cmath>
#include <stdexcept>
#include <string>

namespace pipf {

/// Raised when an argument is non-finite or outside its documented domain.
class InvalidInput : public std::invalid_argument {
 public:
  explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

/// Raised when the generalized mass matrix cannot be inverted (r <= 0).
class SingularityError : public std::domain_error {
 public:
  explicit SingularityError(const std::string& what) : std::domain_error(what) {}
};

/// Raised when an operation is called outside its stated precondition.
class PreconditionError : public std::logic_error {
 public:
  explicit PreconditionError(const std::string& what) : std::logic_error(what) {}
};

namespace detail {

inline void require_finite(double value, const char* name) {
  if (!std::isfinite(value)) {
    throw InvalidInput(std::string(name) + " must be finite");
  }
}

inline void require_positive(double value, const char* name) {
  require_finite(value, name);
  if (!(value > 0.0)) {
    throw InvalidInput(std::string(name) + " must be positive");
  }
}

}  // namespace detail
}  // namespace pipf

#endif  // PIPF_ERRORS_HPP
