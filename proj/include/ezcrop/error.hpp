#pragma once

#include <stdexcept>
#include <string>

namespace ezcrop {

/// A numerical routine produced a result that cannot be trusted (failed SVD,
/// spectral residual out of tolerance, ...).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or unreadable input file.
class FormatError : public std::runtime_error {
 public:
  enum class Kind {
    Io,
    BadMagic,
    BadRank,
    LengthMismatch,
    NonFinite,
    Schema,
  };

  FormatError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace ezcrop
