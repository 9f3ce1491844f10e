#include "repgeom/manifest.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "repgeom/error.hpp"

namespace repgeom {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const json& require(const json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) throw ValidationError(where + ": missing field '" + key + "'");
  return *it;
}

std::uint64_t require_count(const json& j, const char* key, const std::string& where) {
  const json& v = require(j, key, where);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    throw ValidationError(where + ": field '" + key + "' must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

fs::path resolve(const fs::path& base, const json& v, const std::string& where,
                 const char* key) {
  if (!v.is_string()) throw ValidationError(where + ": field '" + key + "' must be a string");
  fs::path p = v.get<std::string>();
  if (p.is_relative()) p = base / p;
  p = p.lexically_normal();
  if (!fs::exists(p)) throw ValidationError(where + ": referenced file missing: " + p.string());
  return p;
}

std::optional<fs::path> optional_path(const json& j, const char* key, const fs::path& base,
                                      const std::string& where) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return resolve(base, *it, where, key);
}

std::string relative_to(const fs::path& p, const fs::path& base) {
  auto rel = p.lexically_relative(base);
  return rel.empty() ? p.string() : rel.generic_string();
}

}  // namespace

std::pair<std::uint64_t, std::uint64_t> matrix_file_shape(const fs::path& path) {
  if (path.extension() == ".npy") {
    Matrix m = read_npy(path);
    return {m.rows(), m.cols()};
  }
  std::ifstream in(path, std::ios::binary);
  unsigned char header[kContainerHeaderBytes];
  if (!in.read(reinterpret_cast<char*>(header), sizeof header)) {
    throw ValidationError(path.string() + ": truncated header");
  }
  if (std::memcmp(header, "LMRX", 4) != 0) {
    throw ValidationError(path.string() + ": bad magic (expected LMRX)");
  }
  auto u64 = [&](std::size_t off) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(header[off + i]) << (8 * i);
    return v;
  };
  return {u64(8), u64(16)};
}

RunManifest load_manifest(const fs::path& path) {
  const std::string where = path.string();
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open manifest: " + where);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(where + ": invalid JSON: " + e.what());
  }
  if (!doc.is_object()) throw ValidationError(where + ": manifest must be a JSON object");

  const fs::path base = fs::absolute(path).parent_path();
  RunManifest m;
  m.source = fs::absolute(path).lexically_normal();

  const json& name = require(doc, "model_name", where);
  if (!name.is_string()) throw ValidationError(where + ": model_name must be a string");
  m.model_name = name.get<std::string>();

  if (auto it = doc.find("checkpoint_step"); it != doc.end() && !it->is_null()) {
    if (!it->is_number_integer()) {
      throw ValidationError(where + ": checkpoint_step must be an integer");
    }
    m.checkpoint_step = it->get<std::int64_t>();
  }

  const json& meta = require(doc, "sample_meta", where);
  if (!meta.is_object()) throw ValidationError(where + ": sample_meta must be an object");
  m.sample_meta.n_contexts = require_count(meta, "n_contexts", where);
  m.sample_meta.context_words = require_count(meta, "context_words", where);
  const json& seed = require(meta, "seed", where);
  if (!seed.is_number_integer()) throw ValidationError(where + ": seed must be an integer");
  m.sample_meta.seed = seed.get<std::int64_t>();

  const json& layers = require(doc, "layers", where);
  if (!layers.is_array() || layers.empty()) {
    throw ValidationError(where + ": layers must be a non-empty array");
  }
  for (const json& entry : layers) {
    if (!entry.is_object()) throw ValidationError(where + ": layer entries must be objects");
    const json& idx = require(entry, "layer_index", where);
    if (!idx.is_number_integer() || idx.get<std::int64_t>() < 0) {
      throw ValidationError(where + ": layer_index must be a non-negative integer");
    }
    LayerEntry layer;
    layer.layer_index = idx.get<int>();
    if (!m.layers.empty() && layer.layer_index <= m.layers.back().layer_index) {
      throw ValidationError(where + ": layer_index values must be strictly increasing (" +
                            std::to_string(m.layers.back().layer_index) + " then " +
                            std::to_string(layer.layer_index) + ")");
    }
    layer.matrix_path = resolve(base, require(entry, "matrix_path", where), where, "matrix_path");
    m.layers.push_back(std::move(layer));
  }

  m.unembedding_path = optional_path(doc, "unembedding_path", base, where);
  m.norm_params_path = optional_path(doc, "norm_params_path", base, where);
  m.target_ids_path = optional_path(doc, "target_ids_path", base, where);
  m.encoding_scores_path = optional_path(doc, "encoding_scores_path", base, where);
  m.voxel_mask_path = optional_path(doc, "voxel_mask_path", base, where);

  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const auto [rows, cols] = matrix_file_shape(m.layers[i].matrix_path);
    if (i == 0) {
      m.n_rows = rows;
    } else if (rows != m.n_rows) {
      throw ValidationError(where + ": row-count mismatch: layer " +
                            std::to_string(m.layers[0].layer_index) + " has " +
                            std::to_string(m.n_rows) + " rows, layer " +
                            std::to_string(m.layers[i].layer_index) + " has " +
                            std::to_string(rows));
    }
  }
  if (m.target_ids_path) {
    const auto [rows, cols] = matrix_file_shape(*m.target_ids_path);
    if (rows != m.n_rows || cols != 1) {
      throw ValidationError(where + ": target ids must be an " + std::to_string(m.n_rows) +
                            "x1 matrix");
    }
  }
  if (m.encoding_scores_path) {
    const auto [rows, cols] = matrix_file_shape(*m.encoding_scores_path);
    if (cols != m.layers.size()) {
      throw ValidationError(where + ": encoding scores must have one column per layer");
    }
    if (m.voxel_mask_path) {
      const auto [mrows, mcols] = matrix_file_shape(*m.voxel_mask_path);
      if (mrows != rows || mcols != 1) {
        throw ValidationError(where + ": voxel mask must be a Vx1 matrix matching the scores");
      }
    }
  }
  return m;
}

void save_manifest(const RunManifest& m, const fs::path& path) {
  const fs::path base = fs::absolute(path).parent_path();
  json doc;
  doc["model_name"] = m.model_name;
  doc["checkpoint_step"] = m.checkpoint_step ? json(*m.checkpoint_step) : json(nullptr);
  doc["sample_meta"] = {{"n_contexts", m.sample_meta.n_contexts},
                        {"context_words", m.sample_meta.context_words},
                        {"seed", m.sample_meta.seed}};
  json layers = json::array();
  for (const auto& layer : m.layers) {
    layers.push_back({{"layer_index", layer.layer_index},
                      {"matrix_path", relative_to(fs::absolute(layer.matrix_path), base)}});
  }
  doc["layers"] = std::move(layers);
  auto put = [&](const char* key, const std::optional<fs::path>& p) {
    if (p) doc[key] = relative_to(fs::absolute(*p), base);
  };
  put("unembedding_path", m.unembedding_path);
  put("norm_params_path", m.norm_params_path);
  put("target_ids_path", m.target_ids_path);
  put("encoding_scores_path", m.encoding_scores_path);
  put("voxel_mask_path", m.voxel_mask_path);

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ValidationError("cannot write manifest: " + path.string());
  out << doc.dump(2) << '\n';
}

}  // namespace repgeom
