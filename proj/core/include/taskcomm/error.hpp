#pragma once

#include <stdexcept>
#include <string>

namespace taskcomm {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An API was called in a state or from a context where it is not allowed.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// A blocking context is stale, foreign, or already consumed.
class InvalidContextError : public UsageError {
 public:
  using UsageError::UsageError;
};

/// A data access with an empty region.
class InvalidAccessError : public UsageError {
 public:
  using UsageError::UsageError;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Bad rank, tag or communicator passed to the transport.
class TransportArgumentError : public Error {
 public:
  using Error::Error;
};

/// Raised in threads blocked inside the transport when it is aborted.
class TransportAborted : public Error {
 public:
  using Error::Error;
};

/// Connection setup or I/O failure on a network backend.
class TransportIoError : public Error {
 public:
  using Error::Error;
};

class ShutdownError : public Error {
 public:
  using Error::Error;
};

}  // namespace taskcomm
