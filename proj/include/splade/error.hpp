#pragma once

#include <stdexcept>
#include <string>

namespace splade {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on shapes, parameters or rectangles does not hold.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Input carries no signal the estimator can act on (e.g. a constant grid).
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

/// The admissible search space of an estimator is empty.
class NoCandidate : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unreadable persisted data.
class FormatError : public Error {
 public:
  enum class Kind { bad_magic, version_mismatch, truncated, malformed, unsupported, io };

  FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace splade
