#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace scnsim {

/// Dense firm index, 0..n-1.
using FirmId = std::uint32_t;
/// Dense bank index, 0..m-1.
using BankId = std::uint32_t;
/// Product / sector code.
using ProductCode = std::uint32_t;

/// Structural problem in input data (bad index, inconsistent layers, ...).
/// CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed file content. Carries file/line/column context in the message.
class SchemaError : public ValidationError {
 public:
  SchemaError(const std::string& file, std::size_t line, std::size_t column,
              const std::string& what)
      : ValidationError(file + ":" + std::to_string(line) + ":" +
                        std::to_string(column) + ": " + what),
        file_(file),
        line_(line),
        column_(column) {}

  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::string file_;
  std::size_t line_;
  std::size_t column_;
};

}  // namespace scnsim
