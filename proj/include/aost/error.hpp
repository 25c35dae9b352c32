#pragma once

#include <stdexcept>
#include <string>

namespace aost {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A configuration does not fit its attribute schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Tensor or image dimensions are incompatible with an operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Bad user input: parameters out of range, missing artifacts, empty lists.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace aost
