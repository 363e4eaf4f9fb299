#pragma once

#include <stdexcept>
#include <string>

namespace spo2 {

// Stable error identifiers. The CLI maps categories to exit codes
// (validation=2, data=3, convergence=4), so both the identifier string
// and the category of an existing code must never change.
enum class Errc {
  // validation
  invalid_header,
  invalid_design,
  invalid_geometry,
  invalid_config,
  feature_schema,
  missing_label,
  degenerate_feature,
  shape_mismatch,
  // data
  corrupt_input,
  invalid_trace,
  empty_session,
  degenerate_histogram,
  insufficient_skin,
  insufficient_samples,
  undefined_hr,
  invalid_dc,
  undefined_ac,
  invalid_scene,
  incompatible_model,
  undefined_correlation,
  leakage,
  // convergence
  no_convergence,
};

enum class ErrorCategory { validation = 2, data = 3, convergence = 4 };

constexpr const char* error_id(Errc c) {
  switch (c) {
    case Errc::invalid_header: return "invalid-header";
    case Errc::invalid_design: return "invalid-design";
    case Errc::invalid_geometry: return "invalid-geometry";
    case Errc::invalid_config: return "invalid-config";
    case Errc::feature_schema: return "feature-schema";
    case Errc::missing_label: return "missing-label";
    case Errc::degenerate_feature: return "degenerate-feature";
    case Errc::shape_mismatch: return "shape-mismatch";
    case Errc::corrupt_input: return "corrupt-input";
    case Errc::invalid_trace: return "invalid-trace";
    case Errc::empty_session: return "empty-session";
    case Errc::degenerate_histogram: return "degenerate-histogram";
    case Errc::insufficient_skin: return "insufficient-skin";
    case Errc::insufficient_samples: return "insufficient-samples";
    case Errc::undefined_hr: return "undefined-hr";
    case Errc::invalid_dc: return "invalid-dc";
    case Errc::undefined_ac: return "undefined-ac";
    case Errc::invalid_scene: return "invalid-scene";
    case Errc::incompatible_model: return "incompatible-model";
    case Errc::undefined_correlation: return "undefined-correlation";
    case Errc::leakage: return "leakage";
    case Errc::no_convergence: return "no-convergence";
  }
  return "unknown";
}

constexpr ErrorCategory error_category(Errc c) {
  switch (c) {
    case Errc::invalid_header:
    case Errc::invalid_design:
    case Errc::invalid_geometry:
    case Errc::invalid_config:
    case Errc::feature_schema:
    case Errc::missing_label:
    case Errc::degenerate_feature:
    case Errc::shape_mismatch:
      return ErrorCategory::validation;
    case Errc::no_convergence:
      return ErrorCategory::convergence;
    default:
      return ErrorCategory::data;
  }
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(error_id(code)) + ": " + detail),
        code_(code) {}

  Errc code() const { return code_; }
  const char* id() const { return error_id(code_); }
  int exit_code() const { return static_cast<int>(error_category(code_)); }

 private:
  Errc code_;
};

}  // namespace spo2
