#pragma once

#include <stdexcept>
#include <string>

namespace dehaze {

// Broad failure class. The CLI maps each class to an exit code.
enum class ErrorKind {
  usage,      // bad flags or parameters supplied by the caller
  data,       // unreadable or malformed inputs, shape/config mismatches
  numerical,  // non-finite values, failed gradient checks
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string code, const std::string& what)
      : std::runtime_error(what), kind_(kind), code_(std::move(code)) {}

  ErrorKind kind() const noexcept { return kind_; }
  // Short stable identifier, e.g. "E_DIMENSION".
  const std::string& code() const noexcept { return code_; }

 private:
  ErrorKind kind_;
  std::string code_;
};

class DimensionError : public Error {
 public:
  DimensionError(std::string axis, const std::string& what)
      : Error(ErrorKind::data, "E_DIMENSION", "dimension error on axis '" + axis + "': " + what),
        axis_(std::move(axis)) {}
  const std::string& axis() const noexcept { return axis_; }

 private:
  std::string axis_;
};

class ParameterError : public Error {
 public:
  explicit ParameterError(const std::string& what)
      : Error(ErrorKind::usage, "E_PARAMETER", what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::data, "E_CONFIG", what) {}
};

class FormatError : public Error {
 public:
  FormatError(std::string code, const std::string& what)
      : Error(ErrorKind::data, std::move(code), what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::data, "E_IO", what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what)
      : Error(ErrorKind::numerical, "E_NUMERICAL", what) {}
};

}  // namespace dehaze
