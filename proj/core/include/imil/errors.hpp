#pragma once

#include <stdexcept>
#include <string>

namespace imil {

/// Root of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition or invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

/// A file could not be read, decoded, or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Operation is illegal in the object's current state (e.g. resolving a case twice).
class StateError : public Error {
 public:
  using Error::Error;
};

/// The backend does not provide the requested capability.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

/// A metric is undefined for the given input (e.g. AUROC with one class).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace imil
