#pragma once

#include <stdexcept>
#include <string>

namespace lnl {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed file content. `field()` names the header field or token at fault.
class ParseError : public Error {
 public:
  ParseError(std::string field, const std::string& what)
      : Error("parse error in '" + field + "': " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Values outside the domain the operation accepts (e.g. non-integer labels).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Orientation or grid that cannot be represented (oblique affines, missing axes).
class GeometryError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Index or box outside a volume.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Configuration that violates a declared invariant; the message lists every violation.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Input for which an operation has no meaningful result (constant image, empty mask).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

}  // namespace lnl
