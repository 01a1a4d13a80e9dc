#pragma once

#include "dbwave/experiments.hpp"

#include <json.hpp>

#include <stdexcept>
#include <string>

namespace dbwave {

/// Raised for every structural problem with a run configuration: malformed
/// text (with line/column), unknown keys (with their path), wrong value
/// types.  The orchestrator maps it to the configuration-error exit status.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MeshConfig {
  int n_r = 4;
  int n_theta = 16;
};

struct OperatorConfig {
  double alpha = 1.0;
  double omega = 1.0;
};

/**
 * Fully resolved run configuration: one document carries every module's
 * knobs.  Unknown keys are rejected during parsing; the experiment section
 * is subcommand-specific and validated by the subcommand that consumes it.
 */
struct RunConfig {
  std::string run_name = "run";
  std::uint64_t seed = 1;
  std::string output_dir;  ///< empty: resolved from flag/environment by the caller
  MeshConfig mesh;
  OperatorConfig op;
  NonlinearitySpec nonlinearity;
  StepperConfig stepper;
  InitialData initial;
  nlohmann::json experiment = nlohmann::json::object();

  /// Every field made explicit (defaults filled in), enums as strings,
  /// object keys sorted.  This is what the manifest echoes.
  nlohmann::json resolved() const;

  /// FNV-1a 64-bit hash of the resolved document, as 16 hex digits.
  std::string content_hash() const;
};

/// Parse and validate a configuration document.  origin names the source in
/// diagnostics (file path or "<override>").
RunConfig parse_config(const std::string& text, const std::string& origin);

/// Read the file and parse it; file-system problems become ConfigError.
RunConfig load_config(const std::string& path);

/// Validate an already-parsed document (used after --set overrides).
RunConfig config_from_json(const nlohmann::json& doc, const std::string& origin);

/// Apply one `dotted.path=json_value` override onto the raw document; the
/// value text is parsed as JSON, falling back to a plain string.  New keys
/// are created; the result must still pass config_from_json.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Parse one initial-data object (shared by the main section and the
/// two-trajectory probes' second data set).  path names it in diagnostics.
InitialData initial_from_json(const nlohmann::json& j, const std::string& path);

/// Parse a document with line/column diagnostics but no schema validation;
/// the --set override flow edits this raw form before config_from_json.
nlohmann::json parse_document(const std::string& text, const std::string& origin);

/// Strict accessors for experiment sections: unknown keys rejected with
/// their path, wrong value types reported with the expected type.
void expect_keys(const nlohmann::json& j, const std::string& path,
                 const std::vector<std::string>& allowed);
double json_number(const nlohmann::json& j, const std::string& path, const char* key,
                   double dflt);
int json_integer(const nlohmann::json& j, const std::string& path, const char* key, int dflt);
std::string json_text(const nlohmann::json& j, const std::string& path, const char* key,
                      const std::string& dflt);
std::vector<double> json_numbers(const nlohmann::json& j, const std::string& path,
                                 const char* key, std::vector<double> dflt);

}  // namespace dbwave
