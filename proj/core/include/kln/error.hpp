#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace kln {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A Cholesky pivot was non-positive.
class NotPositiveDefinite : public Error {
 public:
  NotPositiveDefinite(std::size_t pivot, double value)
      : Error("matrix is not positive definite (pivot " + std::to_string(pivot) +
              " = " + std::to_string(value) + ")"),
        pivot_(pivot) {}
  std::size_t pivot() const noexcept { return pivot_; }

 private:
  std::size_t pivot_;
};

/// NaN/Inf produced or supplied, or a value outside its valid domain.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Backward requested on a tape that holds no forward pass.
class StateError : public Error {
 public:
  using Error::Error;
};

class IdxError : public Error {
 public:
  enum class Kind { BadMagic, Truncated, CountMismatch };
  IdxError(Kind kind, std::uint64_t offset, const std::string& what)
      : Error(what + " (offset " + std::to_string(offset) + ")"), kind_(kind), offset_(offset) {}
  Kind kind() const noexcept { return kind_; }
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  Kind kind_;
  std::uint64_t offset_;
};

/// A file could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

/// Bad configuration: unknown key, malformed value, inconsistent settings.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace kln
