#pragma once

#include <stdexcept>
#include <string>

namespace hyfem {

// Shapes that do not line up (layer widths, gradient bundles, head layouts).
class StructuralError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Bad values handed to an operation (label out of range, NaN costs, ...).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite parameters produced by an update.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t row)
      : std::runtime_error("row " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid run configuration: orphan blocks, H_m > H_0, bad partition requests.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : std::runtime_error(key.empty() ? what : key + ": " + what), key_(key) {}
  explicit ConfigError(const std::string& what) : ConfigError("", what) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class CapacityError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

}  // namespace hyfem
