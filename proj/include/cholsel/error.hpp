#pragma once

#include <stdexcept>
#include <string>

namespace cholsel {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

// A factorization hit a non-positive pivot.
class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

// A quantity that must stay positive collapsed numerically (a conditional
// variance, a likelihood bracket, a Laplace Hessian).
class ConditioningError : public Error {
 public:
  ConditioningError(const std::string& what, int column = -1)
      : Error(what), column_(column) {}
  int column() const noexcept { return column_; }

 private:
  int column_;
};

// Two scores computed under different (n, p, hyperparameter) contexts.
class ContextMismatch : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace cholsel
