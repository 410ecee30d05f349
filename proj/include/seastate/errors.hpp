#pragma once

#include <stdexcept>
#include <string>

namespace seastate {

/// Error categories double as process exit codes for the CLI.
enum class ErrorCategory : int {
  usage = 1,
  config = 2,
  data = 3,
  asset = 4,
  runtime = 5,
};

const char* category_name(ErrorCategory category) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }
  int exit_code() const noexcept { return static_cast<int>(category_); }

 private:
  ErrorCategory category_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorCategory::usage, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorCategory::config, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorCategory::data, what) {}
};

/// Crop or image dimensions that do not fit.
class GeometryError : public DataError {
 public:
  explicit GeometryError(const std::string& what) : DataError("geometry: " + what) {}
};

class InsufficientFramesError : public DataError {
 public:
  explicit InsufficientFramesError(const std::string& what)
      : DataError("insufficient frames: " + what) {}
};

class LabelError : public DataError {
 public:
  explicit LabelError(const std::string& what) : DataError("label: " + what) {}
};

class MappingRequiredError : public DataError {
 public:
  explicit MappingRequiredError(const std::string& what)
      : DataError("label mapping required: " + what) {}
};

class EmptyReportError : public DataError {
 public:
  explicit EmptyReportError(const std::string& what) : DataError("empty report: " + what) {}
};

class ReportError : public DataError {
 public:
  explicit ReportError(const std::string& what) : DataError("report: " + what) {}
};

class AssetError : public Error {
 public:
  explicit AssetError(const std::string& what) : Error(ErrorCategory::asset, what) {}
};

class DivergenceError : public Error {
 public:
  explicit DivergenceError(const std::string& what)
      : Error(ErrorCategory::runtime, "divergence: " + what) {}
};

class MeasurementError : public Error {
 public:
  explicit MeasurementError(const std::string& what)
      : Error(ErrorCategory::runtime, "measurement: " + what) {}
};

}  // namespace seastate
