#pragma once

#include <stdexcept>
#include <string>

namespace llt {

/// Base of every error the toolkit throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class EmptySession : public Error {
 public:
  EmptySession() : Error("session carries no client payload") {}
};

/// A telnet IAC sequence was cut off at the end of the stream. `consumed()`
/// holds the data bytes decoded before the truncated sequence.
class TruncatedControl : public Error {
 public:
  explicit TruncatedControl(std::string consumed)
      : Error("truncated telnet control sequence"), consumed_(std::move(consumed)) {}
  const std::string& consumed() const noexcept { return consumed_; }

 private:
  std::string consumed_;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidMatrix : public Error {
 public:
  using Error::Error;
};

class OracleTooLarge : public Error {
 public:
  using Error::Error;
};

class NotFound : public Error {
 public:
  using Error::Error;
};

class CannotSplit : public Error {
 public:
  using Error::Error;
};

class Inconsistent : public Error {
 public:
  using Error::Error;
};

class Unsupported : public Error {
 public:
  using Error::Error;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

}  // namespace llt
