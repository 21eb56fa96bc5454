#pragma once

#include <stdexcept>
#include <string>

namespace dhal {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad shapes, out-of-range arguments, violated preconditions.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A file could not be read or decoded, or a checkpoint does not fit the model.
class LoadError : public Error {
 public:
  using Error::Error;
};

/// Dataset layout problems: orphans, duplicates, missing roots.
class ManifestError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Non-finite losses, failed matrix square roots.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Unknown config keys or malformed values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Recognition protocol violations (e.g. test identity unseen in training).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

}  // namespace dhal
