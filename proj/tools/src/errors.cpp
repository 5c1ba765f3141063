#include "skipgp/cli/errors.hpp"

#include "skipgp/types.hpp"

namespace skipgp::cli {

ExitCode exit_code_for(const std::exception& error) {
  if (const auto* e = dynamic_cast<const CliError*>(&error)) return e->code();
  if (dynamic_cast<const NumericalBreakdown*>(&error) ||
      dynamic_cast<const ConvergenceError*>(&error) ||
      dynamic_cast<const InitializationError*>(&error)) {
    return ExitCode::kNumerical;
  }
  if (dynamic_cast<const Error*>(&error)) return ExitCode::kInvalidInput;
  return ExitCode::kInternal;
}

nlohmann::json error_report(const std::exception& error) {
  nlohmann::json report;
  report["exit_code"] = static_cast<int>(exit_code_for(error));
  report["message"] = error.what();
  if (const auto* e = dynamic_cast<const CliError*>(&error)) {
    report["error"] = e->kind();
    if (!e->details().empty()) report["details"] = e->details();
  } else if (const auto* e = dynamic_cast<const NumericalBreakdown*>(&error)) {
    report["error"] = "numerical_breakdown";
    report["details"] = {{"iteration", e->iteration()}};
  } else if (const auto* e = dynamic_cast<const ConvergenceError*>(&error)) {
    report["error"] = "convergence_error";
    report["details"] = {{"residual", e->residual()}};
  } else if (dynamic_cast<const InitializationError*>(&error)) {
    report["error"] = "initialization_error";
  } else if (const auto* e = dynamic_cast<const OutOfRangeError*>(&error)) {
    report["error"] = "out_of_range";
    report["details"] = {{"point_index", e->point_index()}};
  } else if (dynamic_cast<const DimensionError*>(&error)) {
    report["error"] = "dimension_error";
  } else if (dynamic_cast<const Error*>(&error)) {
    report["error"] = "invalid_input";
  } else {
    report["error"] = "internal_error";
  }
  return report;
}

}  // namespace skipgp::cli
