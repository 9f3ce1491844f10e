#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "repgeom/manifest.hpp"

namespace repgeom {

inline constexpr const char* kReportSchemaVersion = "1.0";

struct ReportConfig {
  std::size_t k_max = 1024;  // capped at N - 1
  std::optional<std::size_t> scale_override;
  bool use_presets = true;
  std::size_t plateau_window = 3;
  double pca_threshold = 0.99;
  std::optional<double> log_base;  // natural log when empty
  bool surprisal = true;
  bool surprisal_bits = false;
  double train_fraction = 0.8;
  std::size_t n_perm = 10000;
  std::uint64_t seed = 0;
  bool deterministic = false;

  static ReportConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Reads a config document (same JSON dialect as manifests). Unknown keys are
/// rejected.
ReportConfig load_report_config(const std::filesystem::path& path);

/// Runs every analysis on the manifests. Manifests sharing model_name and
/// checkpoint_step are treated as repeated samples of one run; a model with
/// several checkpoint steps forms a checkpoint series. Section failures are
/// recorded in the document rather than thrown.
nlohmann::json build_report(std::span<const RunManifest> manifests, const ReportConfig& config);

/// Writes report.json plus CSV tables and SVG plots derived from it.
void write_report(const nlohmann::json& report, const std::filesystem::path& out_dir);

/// Structural check of a report against the bundled JSON schema subset
/// (type, required, properties, items, enum). Returns the list of violations.
std::vector<std::string> validate_against_schema(const nlohmann::json& doc,
                                                 const nlohmann::json& schema);

/// The schema shipped with the library.
const nlohmann::json& report_schema();

}  // namespace repgeom
