#pragma once

#include <stdexcept>
#include <string>

namespace probe {

/// Base class for every error raised by the harness.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input file does not have the expected columns/fields.
class SchemaError : public Error {
 public:
  SchemaError(const std::string& what, std::size_t row, std::string field);
  explicit SchemaError(const std::string& what) : Error(what) {}

  std::size_t row() const noexcept { return row_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::size_t row_ = 0;
  std::string field_;
};

/// Data parsed fine but violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Caller violated an operation's precondition.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// A statistic or scale is mathematically undefined for the given input.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

class RenderError : public Error {
 public:
  RenderError(const std::string& what, std::string placeholder)
      : Error(what), placeholder_(std::move(placeholder)) {}
  const std::string& placeholder() const noexcept { return placeholder_; }

 private:
  std::string placeholder_;
};

/// Network-level failure after retries were exhausted.
class TransportError : public Error {
 public:
  TransportError(const std::string& what, std::string endpoint)
      : Error(what), endpoint_(std::move(endpoint)) {}
  const std::string& endpoint() const noexcept { return endpoint_; }

 private:
  std::string endpoint_;
};

/// The remote answered with a non-2xx status.
class UpstreamError : public Error {
 public:
  UpstreamError(const std::string& what, int status) : Error(what), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

/// The remote answered 2xx but the body does not match the wire contract.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// A qualitative-coding phase was requested out of order.
class ProtocolOrderError : public Error {
 public:
  using Error::Error;
};

}  // namespace probe
