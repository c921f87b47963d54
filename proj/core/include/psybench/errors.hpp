#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace psybench {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class OutOfRangeError : public Error {
 public:
  OutOfRangeError(char component, double value);
  char component() const noexcept { return component_; }
  double value() const noexcept { return value_; }

 private:
  char component_;
  double value_;
};

class NonFiniteError : public Error {
 public:
  explicit NonFiniteError(char component);
  char component() const noexcept { return component_; }

 private:
  char component_;
};

class KTooLargeError : public Error {
 public:
  KTooLargeError(std::size_t k, std::size_t available);
};

/// A record failed schema validation (missing field, bad version, leakage...).
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Trait names or scores found in persona text that must stay implicit.
class LeakageError : public SchemaError {
 public:
  LeakageError(std::string field, std::string match);
  const std::string& field() const noexcept { return field_; }
  const std::string& match() const noexcept { return match_; }

 private:
  std::string field_;
  std::string match_;
};

class UnparsableError : public Error {
 public:
  explicit UnparsableError(std::vector<char> missing);
  const std::vector<char>& missing() const noexcept { return missing_; }

 private:
  std::vector<char> missing_;
};

class ZeroVectorError : public Error {
 public:
  ZeroVectorError() : Error("cosine undefined for a zero vector") {}
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

class TemplateUnresolvedError : public Error {
 public:
  explicit TemplateUnresolvedError(std::string slot);
  const std::string& slot() const noexcept { return slot_; }

 private:
  std::string slot_;
};

class SpanMismatchError : public Error {
 public:
  using Error::Error;
};

/// HTTP failure after retries; status is 0 when no response was received.
class TransportError : public Error {
 public:
  TransportError(int status, const std::string& detail);
  int status() const noexcept { return status_; }

 private:
  int status_;
};

class ScorerUnparsableError : public Error {
 public:
  using Error::Error;
};

class EmptyResponseError : public Error {
 public:
  EmptyResponseError() : Error("no unmasked tokens in response") {}
};

class UnknownSymbolError : public Error {
 public:
  explicit UnknownSymbolError(char symbol);
  char symbol() const noexcept { return symbol_; }

 private:
  char symbol_;
};

class UnknownComponentError : public Error {
 public:
  explicit UnknownComponentError(const std::string& name);
};

class MissingRowError : public Error {
 public:
  explicit MissingRowError(const std::string& row);
};

}  // namespace psybench
