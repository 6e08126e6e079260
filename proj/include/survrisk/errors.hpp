#pragma once

#include <stdexcept>
#include <string>

namespace survrisk {

// Broad failure classes. Each maps onto one CLI exit code.
enum class ErrorKind { Config, Data, Numeric };

int exit_code_for(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::Numeric, what) {}
};

// Metric has no defined value on the given data (e.g. no comparable pairs).
class UndefinedMetricError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace survrisk
