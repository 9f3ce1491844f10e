#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "repgeom/matrix.hpp"

namespace repgeom {

struct LayerEntry {
  int layer_index = 0;
  std::filesystem::path matrix_path;  // absolute after load
};

struct SampleMeta {
  std::uint64_t n_contexts = 0;
  std::uint64_t context_words = 0;
  std::int64_t seed = 0;
};

/// Sidecar describing one exported run: per-layer activation matrices plus
/// the optional inputs of the surprisal probe. Relative paths in the JSON
/// document are resolved against the manifest's directory.
struct RunManifest {
  std::string model_name;
  std::optional<std::int64_t> checkpoint_step;
  std::vector<LayerEntry> layers;
  SampleMeta sample_meta;
  std::optional<std::filesystem::path> unembedding_path;
  std::optional<std::filesystem::path> norm_params_path;
  std::optional<std::filesystem::path> target_ids_path;
  // Optional extensions consumed by the report: a V x L matrix of encoding
  // scores (one column per listed layer) and a V x 1 voxel mask (nonzero keeps).
  std::optional<std::filesystem::path> encoding_scores_path;
  std::optional<std::filesystem::path> voxel_mask_path;

  std::filesystem::path source;  // the manifest file itself
  std::uint64_t n_rows = 0;      // shared N of all layer matrices

  bool has_probe_inputs() const {
    return unembedding_path && norm_params_path && target_ids_path;
  }
};

/// Parses and validates a manifest: schema, strictly increasing layer
/// indices, existence of every referenced file, identical row counts across
/// layers, and target length.
RunManifest load_manifest(const std::filesystem::path& path);

/// Writes the manifest JSON with paths relative to the manifest's directory
/// where possible.
void save_manifest(const RunManifest& manifest, const std::filesystem::path& path);

/// Row and column counts of a matrix file without reading its payload
/// (container files only; npy files are read in full).
std::pair<std::uint64_t, std::uint64_t> matrix_file_shape(const std::filesystem::path& path);

}  // namespace repgeom
