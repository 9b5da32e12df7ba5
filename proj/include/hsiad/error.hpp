#ifndef HSIAD_ERROR_HPP
#define HSIAD_ERROR_HPP

#include <stdexcept>
#include <string>

namespace hsiad {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent file content.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Operand dimensions that do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Covariance that stays indefinite after regularization.
class FactorizationError : public Error {
 public:
  using Error::Error;
};

class EmptyTrainingSetError : public Error {
 public:
  explicit EmptyTrainingSetError(int dim)
      : Error("empty training set for d=" + std::to_string(dim)), dim_(dim) {}
  int dim() const { return dim_; }

 private:
  int dim_;
};

class NonFiniteError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace hsiad

#endif  // HSIAD_ERROR_HPP
