#pragma once

#include <stdexcept>
#include <string>

namespace rcpadmm {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Rank-deficient regressors or stacked constraint matrix.
class IllConditionedProblem : public Error {
 public:
  using Error::Error;
};

class NumericFailure : public Error {
 public:
  using Error::Error;
};

// Raised when SVD factor derivatives cannot be formed (repeated or vanishing
// singular values).
class SensitivityUnavailable : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidArgument(message);
}

}  // namespace detail

}  // namespace rcpadmm
