#pragma once

#include <stdexcept>
#include <string>

namespace fetl {

/// Root of the library's exception hierarchy.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Operand dimensions do not agree.
class ShapeError : public Error {
public:
  using Error::Error;
};

/// A documented precondition was violated by the caller.
class ContractError : public Error {
public:
  using Error::Error;
};

/// A sample has no present feature, so nothing can be pooled.
class AllFeaturesMissing : public ContractError {
public:
  AllFeaturesMissing() : ContractError("all features missing: at least one present feature is required") {}
  using ContractError::ContractError;
};

/// NaN/Inf encountered where finite values are required.
class NumericalError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

/// Malformed input file. `line` is 1-based, 0 when not applicable.
class ParseError : public Error {
public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

class IoError : public Error {
public:
  using Error::Error;
};

}  // namespace fetl
