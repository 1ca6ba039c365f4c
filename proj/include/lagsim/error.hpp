#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lagsim {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class UndeclaredSymbol : public Error {
 public:
  using Error::Error;
};

class ForeignSymbol : public Error {
 public:
  using Error::Error;
};

class InsufficientTokens : public Error {
 public:
  using Error::Error;
};

class UnsupportedMachine : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class EmptyCodebook : public Error {
 public:
  using Error::Error;
};

class InvalidCodebook : public Error {
 public:
  using Error::Error;
};

class NonFiniteLoss : public Error {
 public:
  using Error::Error;
};

class ContextOverflow : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Remote backend failures.
class TransportError : public Error {
 public:
  using Error::Error;
};

class ProviderRefusal : public Error {
 public:
  ProviderRefusal(int status, const std::string& what)
      : Error("provider refused request (HTTP " + std::to_string(status) + "): " + what),
        status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

class CacheCorruption : public Error {
 public:
  using Error::Error;
};

}  // namespace lagsim
