#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace deepesn {

// Input/weight shape does not match what an operation expects.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A state or solve produced NaN/Inf.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Recurrent matrix has (numerically) zero spectral radius; rescaling is undefined.
class DegenerateSpectrumError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Normal equations are singular (beta = 0 and rank-deficient Gram matrix).
class SingularSystemError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// CSV or config text could not be parsed; carries a 1-based line number when known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, long line = 0)
      : std::runtime_error(line > 0 ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

// Model file is damaged or truncated.
class CorruptFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Model file schema_version not supported by this build.
class VersionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Experiment configuration failed validation; lists every violated field.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> violations)
      : std::runtime_error(join(violations)), violations_(std::move(violations)) {}
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out = "invalid configuration:";
    for (const auto& s : v) {
      out += "\n  - " + s;
    }
    return out;
  }
  std::vector<std::string> violations_;
};

}  // namespace deepesn
