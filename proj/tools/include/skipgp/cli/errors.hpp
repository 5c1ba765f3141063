#pragma once

#include <cstdint>
#include <exception>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

namespace skipgp::cli {

// Process exit codes. Every failure class maps to its own code.
enum class ExitCode : int {
  kOk = 0,
  kInternal = 1,       // unexpected exception
  kUsage = 2,          // bad command line
  kConfig = 3,         // invalid run configuration
  kSchema = 4,         // dataset lacks a required column
  kParse = 5,          // dataset cell is not a number
  kValidation = 6,     // dataset value is NaN or infinite
  kMissingModel = 7,   // model artifact does not exist
  kModelInvalid = 8,   // model artifact unreadable or stale
  kNumerical = 9,      // breakdown, non-convergence, failed initialization
  kInvalidInput = 10,  // dimension, range or argument error from the library
  kIo = 11,            // output could not be written
};

class CliError : public std::runtime_error {
 public:
  CliError(ExitCode code, std::string kind, const std::string& what)
      : std::runtime_error(what), code_(code), kind_(std::move(kind)) {}
  ExitCode code() const { return code_; }
  const std::string& kind() const { return kind_; }
  const nlohmann::json& details() const { return details_; }

 protected:
  nlohmann::json details_ = nlohmann::json::object();

 private:
  ExitCode code_;
  std::string kind_;
};

class ConfigError : public CliError {
 public:
  explicit ConfigError(const std::string& what)
      : CliError(ExitCode::kConfig, "config_error", what) {}
};

class SchemaError : public CliError {
 public:
  SchemaError(const std::string& what, const std::string& column)
      : CliError(ExitCode::kSchema, "schema_error", what), column_(column) {
    details_["column"] = column;
  }
  const std::string& column() const { return column_; }

 private:
  std::string column_;
};

// `row` counts data rows from 1 (the header is not a row); `line` is the
// 1-based line in the file.
class ParseError : public CliError {
 public:
  ParseError(const std::string& what, std::int64_t row, std::int64_t line,
             const std::string& column)
      : CliError(ExitCode::kParse, "parse_error", what), row_(row), column_(column) {
    details_["row"] = row;
    details_["line"] = line;
    details_["column"] = column;
  }
  std::int64_t row() const { return row_; }
  const std::string& column() const { return column_; }

 private:
  std::int64_t row_;
  std::string column_;
};

class ValidationError : public CliError {
 public:
  ValidationError(const std::string& what, std::int64_t row, const std::string& column)
      : CliError(ExitCode::kValidation, "validation_error", what) {
    details_["row"] = row;
    details_["column"] = column;
  }
};

class MissingModelError : public CliError {
 public:
  explicit MissingModelError(const std::string& path)
      : CliError(ExitCode::kMissingModel, "missing_model",
                 "model artifact not found: " + path) {
    details_["path"] = path;
  }
};

class ModelError : public CliError {
 public:
  explicit ModelError(const std::string& what)
      : CliError(ExitCode::kModelInvalid, "model_error", what) {}
};

class IoError : public CliError {
 public:
  explicit IoError(const std::string& what) : CliError(ExitCode::kIo, "io_error", what) {}
};

// Exit code and structured report for any exception escaping a command.
ExitCode exit_code_for(const std::exception& error);
nlohmann::json error_report(const std::exception& error);

}  // namespace skipgp::cli
