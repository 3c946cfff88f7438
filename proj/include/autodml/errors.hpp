#pragma once

#include <stdexcept>
#include <string>

namespace autodml {

// Error taxonomy mirrored by the CLI exit codes: config -> 2, data -> 3,
// estimation -> 4.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

class SchemaError : public DataError {
 public:
  explicit SchemaError(const std::string& msg) : DataError(msg) {}
};

class ParseError : public DataError {
 public:
  explicit ParseError(const std::string& msg) : DataError(msg) {}
};

class ValidationError : public DataError {
 public:
  explicit ValidationError(const std::string& msg) : DataError(msg) {}
};

class EstimationError : public std::runtime_error {
 public:
  explicit EstimationError(const std::string& msg) : std::runtime_error(msg) {}
};

// No complier mass detected: the mean treatment contrast is numerically zero.
class WeakFirstStageError : public EstimationError {
 public:
  explicit WeakFirstStageError(const std::string& msg) : EstimationError(msg) {}
};

class DegenerateLabelsError : public EstimationError {
 public:
  explicit DegenerateLabelsError(const std::string& msg) : EstimationError(msg) {}
};

}  // namespace autodml
