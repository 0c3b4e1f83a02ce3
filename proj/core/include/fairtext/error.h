#pragma once

#include <stdexcept>
#include <string>

namespace fairtext {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller supplied input that violates a precondition or schema.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Reading or writing a file failed.
class IoError : public Error {
 public:
  using Error::Error;
};

// A metric is not defined for the given input (e.g. AUC on one class).
class MetricError : public Error {
 public:
  using Error::Error;
};

// A remote service could not be reached after all retries.
class TransportError : public Error {
 public:
  using Error::Error;
};

}  // namespace fairtext
