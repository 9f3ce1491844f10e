#include "repgeom/report.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "repgeom/error.hpp"
#include "repgeom/intrinsic_dim.hpp"
#include "repgeom/linear_dim.hpp"
#include "repgeom/neighbors.hpp"
#include "repgeom/parallel.hpp"
#include "repgeom/probe.hpp"
#include "repgeom/profile.hpp"
#include "repgeom/similarity.hpp"
#include "repgeom/svg.hpp"

#include "report_schema.inc"

namespace repgeom {
namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------- config

ReportConfig ReportConfig::from_json(const json& j) {
  static const std::set<std::string> kKnown{
      "k_max",         "scale_override", "use_presets",   "plateau_window",
      "pca_threshold", "log_base",       "surprisal",     "surprisal_bits",
      "train_fraction", "n_perm",        "seed",          "deterministic"};
  if (!j.is_object()) throw ValidationError("report config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!kKnown.contains(key)) throw ValidationError("unknown report config key '" + key + "'");
  }
  ReportConfig c;
  try {
    auto count = [&](const char* key, std::size_t& out) {
      if (auto it = j.find(key); it != j.end()) {
        if (!it->is_number_integer() || it->get<std::int64_t>() < 0) {
          throw ValidationError(std::string("config '") + key + "' must be a non-negative integer");
        }
        out = it->get<std::size_t>();
      }
    };
    count("k_max", c.k_max);
    count("plateau_window", c.plateau_window);
    count("n_perm", c.n_perm);
    if (auto it = j.find("scale_override"); it != j.end() && !it->is_null()) {
      c.scale_override = it->get<std::size_t>();
    }
    if (auto it = j.find("log_base"); it != j.end() && !it->is_null()) {
      c.log_base = it->get<double>();
    }
    c.use_presets = j.value("use_presets", c.use_presets);
    c.pca_threshold = j.value("pca_threshold", c.pca_threshold);
    c.surprisal = j.value("surprisal", c.surprisal);
    c.surprisal_bits = j.value("surprisal_bits", c.surprisal_bits);
    c.train_fraction = j.value("train_fraction", c.train_fraction);
    c.seed = j.value("seed", c.seed);
    c.deterministic = j.value("deterministic", c.deterministic);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("report config: ") + e.what());
  }
  if (c.k_max < 2) throw ValidationError("k_max must be at least 2");
  if (c.plateau_window == 0) throw ValidationError("plateau_window must be positive");
  return c;
}

json ReportConfig::to_json() const {
  return {{"k_max", k_max},
          {"scale_override", scale_override ? json(*scale_override) : json(nullptr)},
          {"use_presets", use_presets},
          {"plateau_window", plateau_window},
          {"pca_threshold", pca_threshold},
          {"log_base", log_base ? json(*log_base) : json(nullptr)},
          {"surprisal", surprisal},
          {"surprisal_bits", surprisal_bits},
          {"train_fraction", train_fraction},
          {"n_perm", n_perm},
          {"seed", seed},
          {"deterministic", deterministic},
          {"cv_scheme", "chunked k-fold ridge (encode subcommand)"}};
}

ReportConfig load_report_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config: " + path.string());
  try {
    return ReportConfig::from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": invalid JSON: " + e.what());
  }
}

// ---------------------------------------------------------------- helpers

namespace {

using OptVec = std::vector<std::optional<double>>;

json nullable(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json to_json(const OptVec& v) {
  json out = json::array();
  for (const auto& x : v) out.push_back(nullable(x));
  return out;
}

struct MeanStd {
  OptVec mean, std;
};

// Per-position mean and sample standard deviation across repeats; a position
// is masked if any repeat is missing it.
MeanStd aggregate(const std::vector<OptVec>& repeats) {
  MeanStd out;
  if (repeats.empty()) return out;
  const std::size_t n = repeats[0].size();
  out.mean.assign(n, std::nullopt);
  out.std.assign(n, std::nullopt);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> xs;
    for (const auto& r : repeats) {
      if (i < r.size() && r[i]) xs.push_back(*r[i]);
    }
    if (xs.size() != repeats.size()) continue;
    const double m = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    out.mean[i] = m;
    if (xs.size() > 1) {
      double ss = 0.0;
      for (double x : xs) ss += (x - m) * (x - m);
      out.std[i] = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    }
  }
  return out;
}

json profile_json(const MeanStd& ms) { return {{"values", to_json(ms.mean)}, {"std", to_json(ms.std)}}; }

struct Group {
  std::string model;
  std::optional<std::int64_t> checkpoint;
  std::vector<const RunManifest*> repeats;
};

std::vector<Group> group_manifests(std::span<const RunManifest> manifests) {
  std::vector<Group> groups;
  for (const auto& m : manifests) {
    auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& g) {
      return g.model == m.model_name && g.checkpoint == m.checkpoint_step;
    });
    if (it == groups.end()) {
      groups.push_back({m.model_name, m.checkpoint_step, {}});
      it = groups.end() - 1;
    }
    it->repeats.push_back(&m);
  }
  return groups;
}

// Summary kept for cross-checkpoint statistics.
struct GroupResult {
  std::string model;
  std::optional<std::int64_t> checkpoint;
  std::vector<int> layers;
  OptVec id;
  OptVec encoding;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

json analyse_group(const Group& group, const ReportConfig& config, GroupResult& result,
                   json& timing) {
  const auto t_start = std::chrono::steady_clock::now();
  const RunManifest& first = *group.repeats.front();
  const std::size_t n_layers = first.layers.size();
  const std::size_t n_rep = group.repeats.size();

  json model;
  model["model_name"] = group.model;
  model["checkpoint_step"] = group.checkpoint ? json(*group.checkpoint) : json(nullptr);
  model["manifests"] = json::array();
  for (const auto* m : group.repeats) model["manifests"].push_back(m->source.filename().string());
  model["repeats"] = n_rep;
  model["n_samples"] = first.n_rows;
  std::vector<int> layer_indices;
  for (const auto& l : first.layers) layer_indices.push_back(l.layer_index);
  model["layer_indices"] = layer_indices;
  json warnings = json::array();
  json errors = json::array();
  auto record_error = [&](const std::string& section, const std::string& message) {
    errors.push_back({{"section", section}, {"message", message}});
  };

  for (const auto* m : group.repeats) {
    std::vector<int> li;
    for (const auto& l : m->layers) li.push_back(l.layer_index);
    if (li != layer_indices || m->n_rows != first.n_rows) {
      throw ValidationError("repeats of " + group.model +
                            " disagree on layer indices or sample count");
    }
  }

  const std::size_t k_max = std::min<std::size_t>(config.k_max, first.n_rows - 1);
  std::vector<std::vector<ScaleCurve>> curves(n_rep, std::vector<ScaleCurve>(n_layers));
  std::vector<OptVec> pr(n_rep, OptVec(n_layers)), pca(n_rep, OptVec(n_layers));
  std::vector<std::size_t> ambient(n_layers, 0);
  std::vector<std::size_t> discarded(n_layers, 0);
  std::vector<std::vector<std::optional<double>>> cka_sum;
  std::vector<std::string> cka_flags;
  std::size_t cka_count = 0;
  bool unit_warning_any = false;

  double t_knn = 0.0, t_linear = 0.0, t_cka = 0.0;
  for (std::size_t r = 0; r < n_rep; ++r) {
    std::vector<Matrix> layers;
    layers.reserve(n_layers);
    for (std::size_t l = 0; l < n_layers; ++l) {
      const std::string section = "layer " + std::to_string(layer_indices[l]);
      try {
        layers.push_back(load_matrix_file(group.repeats[r]->layers[l].matrix_path));
      } catch (const std::exception& e) {
        throw ValidationError(section + ": " + e.what());
      }
      const Matrix& x = layers.back();
      ambient[l] = x.cols();
      auto t0 = std::chrono::steady_clock::now();
      try {
        const auto filtered = filter_degenerate(knn_exact(x, k_max));
        discarded[l] = std::max(discarded[l], filtered.discarded);
        curves[r][l] = scale_sweep(filtered.table);
      } catch (const std::exception& e) {
        record_error(section + " intrinsic dimension", e.what());
      }
      t_knn += seconds_since(t0);
      t0 = std::chrono::steady_clock::now();
      try {
        const auto spectrum = covariance_spectrum(x);
        pr[r][l] = participation_ratio(spectrum);
        pca[r][l] = static_cast<double>(pca_effective_dim(spectrum, config.pca_threshold));
      } catch (const std::exception& e) {
        record_error(section + " linear dimension", e.what());
      }
      t_linear += seconds_since(t0);
    }
    const auto t0 = std::chrono::steady_clock::now();
    const CkaMatrix cka = cka_matrix(layers);
    if (cka_sum.empty()) {
      cka_sum.assign(n_layers, std::vector<std::optional<double>>(n_layers, 0.0));
    }
    for (std::size_t a = 0; a < n_layers; ++a) {
      for (std::size_t b = 0; b < n_layers; ++b) {
        auto& slot = cka_sum[a][b];
        slot = (slot && cka(a, b)) ? std::optional<double>(*slot + *cka(a, b)) : std::nullopt;
      }
    }
    for (const auto& f : cka.flags) {
      if (std::find(cka_flags.begin(), cka_flags.end(), f) == cka_flags.end()) cka_flags.push_back(f);
    }
    ++cka_count;
    t_cka += seconds_since(t0);
  }
  model["ambient_dims"] = ambient;
  model["discarded_duplicates"] = discarded;
  for (std::size_t l = 0; l < n_layers; ++l) {
    if (discarded[l] > 0) {
      warnings.push_back("layer " + std::to_string(layer_indices[l]) + ": removed " +
                         std::to_string(discarded[l]) + " duplicate points before Id estimation");
    }
  }

  // Scale curves averaged over repeats, one per layer.
  std::vector<ScaleCurve> mean_curves(n_layers);
  json curves_json = json::array();
  for (std::size_t l = 0; l < n_layers; ++l) {
    ScaleCurve& mc = mean_curves[l];
    json entries = json::array();
    for (std::size_t e = 0; e < curves[0][l].entries.size(); ++e) {
      ScaleEntry entry;
      entry.k = curves[0][l].entries[e].k;
      std::vector<OptVec> ids(n_rep, OptVec(1));
      std::size_t n_used = 0;
      double loglik = 0.0;
      std::string err;
      for (std::size_t r = 0; r < n_rep; ++r) {
        const auto& src = curves[r][l].entries;
        if (e < src.size() && src[e].estimate) {
          ids[r][0] = src[e].estimate->id;
          n_used += src[e].estimate->n_used;
          loglik += src[e].estimate->log_likelihood;
        } else if (e < src.size() && err.empty()) {
          err = src[e].error;
        }
      }
      const MeanStd ms = aggregate(ids);
      if (ms.mean[0]) {
        IdEstimate est;
        est.id = *ms.mean[0];
        est.k = entry.k;
        est.n_used = n_used / n_rep;
        est.log_likelihood = loglik / static_cast<double>(n_rep);
        entry.estimate = est;
      } else {
        entry.error = err.empty() ? "estimation failed in a repeat" : err;
      }
      entries.push_back({{"k", entry.k},
                         {"id", nullable(ms.mean[0])},
                         {"id_std", nullable(ms.std[0])},
                         {"n_used", entry.estimate ? json(entry.estimate->n_used) : json(nullptr)},
                         {"log_likelihood", entry.estimate ? json(entry.estimate->log_likelihood)
                                                           : json(nullptr)},
                         {"error", entry.estimate ? json(nullptr) : json(entry.error)}});
      mc.entries.push_back(std::move(entry));
    }
    curves_json.push_back({{"layer_index", layer_indices[l]}, {"entries", std::move(entries)}});
  }

  // One scale per model: override, then preset, then plateau rule.
  std::optional<std::size_t> selected;
  std::string selection = "none";
  auto available = [&](std::size_t k) {
    return std::all_of(mean_curves.begin(), mean_curves.end(), [&](const ScaleCurve& c) {
      const auto* e = c.at(k);
      return e && e->estimate;
    });
  };
  if (config.scale_override) {
    if (available(*config.scale_override)) {
      selected = config.scale_override, selection = "override";
    } else {
      record_error("scale selection", "override k=" + std::to_string(*config.scale_override) +
                                          " is not a valid entry of every scale curve");
    }
  }
  if (!selected && config.use_presets && !config.scale_override) {
    if (auto preset = scale_preset(group.model, group.checkpoint)) {
      if (available(*preset)) {
        selected = preset, selection = "preset";
      } else {
        warnings.push_back("preset scale k=" + std::to_string(*preset) +
                           " unavailable (k_max too small?); falling back to plateau rule");
      }
    }
  }
  if (!selected && !config.scale_override) {
    try {
      selected = select_scale(mean_curves, config.plateau_window);
      selection = "plateau";
    } catch (const std::exception& e) {
      record_error("scale selection", e.what());
    }
  }
  model["scale_analysis"] = {{"k_max", k_max},
                             {"selected_k", selected ? json(*selected) : json(nullptr)},
                             {"selection", selection},
                             {"window", config.plateau_window},
                             {"curves", std::move(curves_json)}};

  // Id at the selected scale.
  std::vector<OptVec> id_rep(n_rep, OptVec(n_layers)), id_norm_rep(n_rep, OptVec(n_layers));
  if (selected) {
    for (std::size_t r = 0; r < n_rep; ++r) {
      for (std::size_t l = 0; l < n_layers; ++l) {
        const auto* e = curves[r][l].at(*selected);
        if (!e || !e->estimate) continue;
        id_rep[r][l] = e->estimate->id;
        unit_warning_any = unit_warning_any || e->estimate->unit_ratio_warning;
        try {
          id_norm_rep[r][l] = normalize_id(*e->estimate, ambient[l], config.log_base);
        } catch (const std::exception& ex) {
          record_error("normalised Id", ex.what());
        }
      }
    }
  }
  if (unit_warning_any) {
    warnings.push_back("more than 1% of distance ratios equal 1 at the selected scale");
  }
  const MeanStd id = aggregate(id_rep);
  const MeanStd pr_ms = aggregate(pr);
  const MeanStd pca_ms = aggregate(pca);
  json profiles;
  profiles["id"] = profile_json(id);
  profiles["id_normalized"] = profile_json(aggregate(id_norm_rep));
  profiles["participation_ratio"] = profile_json(pr_ms);
  profiles["pca_dim"] = profile_json(pca_ms);
  profiles["log_base"] = config.log_base ? json(*config.log_base) : json("e");

  for (std::size_t l = 0; l < n_layers; ++l) {
    if (id.mean[l] && pr_ms.mean[l] && pca_ms.mean[l] &&
        !(*pca_ms.mean[l] >= *pr_ms.mean[l] && *pr_ms.mean[l] >= *id.mean[l])) {
      warnings.push_back("layer " + std::to_string(layer_indices[l]) +
                         ": expected ordering PCA-d >= PR >= Id does not hold");
    }
  }

  // CKA, averaged over repeats.
  json cka_values = json::array();
  for (std::size_t a = 0; a < n_layers; ++a) {
    json row = json::array();
    for (std::size_t b = 0; b < n_layers; ++b) {
      const auto& s = cka_sum[a][b];
      row.push_back(s ? json(*s / static_cast<double>(cka_count)) : json(nullptr));
    }
    cka_values.push_back(std::move(row));
  }
  model["cka"] = {{"layer_indices", layer_indices}, {"values", std::move(cka_values)},
                  {"flags", cka_flags}};

  // Surprisal.
  std::optional<LayerProfile> surprisal_profile_opt;
  model["surprisal"] = nullptr;
  const auto t_probe0 = std::chrono::steady_clock::now();
  if (config.surprisal && first.unembedding_path && first.target_ids_path) {
    try {
      std::vector<OptVec> s_rep;
      std::vector<OptVec> resid_rep;
      SurprisalProfile last;
      for (std::size_t r = 0; r < n_rep; ++r) {
        last = surprisal_profile(*group.repeats[r], config.train_fraction, config.seed + r);
        const double unit = config.surprisal_bits ? 1.0 / std::log(2.0) : 1.0;
        OptVec s, res;
        for (std::size_t l = 0; l < n_layers; ++l) {
          s.push_back(last.surprisal[l] * unit);
          res.push_back(last.probe_residual[l]);
        }
        s_rep.push_back(std::move(s));
        resid_rep.push_back(std::move(res));
        for (const auto& w : last.warnings) warnings.push_back(w);
      }
      const MeanStd s_ms = aggregate(s_rep);
      profiles["surprisal"] = profile_json(s_ms);
      json residual = json::array();
      for (const auto& v : aggregate(resid_rep).mean) residual.push_back(v.value_or(0.0));
      model["surprisal"] = {{"units", config.surprisal_bits ? "bits" : "nats"},
                            {"n_train", last.n_train},
                            {"n_validation", last.n_validation},
                            {"standardized_norm", last.standardized_norm},
                            {"probe_residual", std::move(residual)}};
      LayerProfile p;
      p.metric_name = "surprisal";
      p.layer_indices = layer_indices;
      p.values = s_ms.mean;
      surprisal_profile_opt = std::move(p);
    } catch (const std::exception& e) {
      record_error("surprisal", e.what());
    }
  } else if (config.surprisal) {
    warnings.push_back("manifest lacks unembedding or target ids; surprisal skipped");
  }
  const double t_probe = seconds_since(t_probe0);

  LayerProfile id_profile;
  id_profile.metric_name = "id";
  id_profile.layer_indices = layer_indices;
  id_profile.values = id.mean;
  id_profile.meta.model = group.model;
  id_profile.meta.checkpoint_step = group.checkpoint;
  id_profile.meta.repeats = n_rep;
  id_profile.meta.std_dev = id.std;

  // Encoding scores, if supplied.
  std::optional<LayerProfile> encoding_profile_opt;
  model["encoding"] = nullptr;
  if (first.encoding_scores_path) {
    try {
      const Matrix scores = load_matrix_file(*first.encoding_scores_path);
      std::vector<EncodingScores> per_layer(n_layers);
      OptVec enc_mean(n_layers);
      for (std::size_t l = 0; l < n_layers; ++l) {
        per_layer[l].layer_index = layer_indices[l];
        for (std::size_t v = 0; v < scores.rows(); ++v) per_layer[l].per_voxel.push_back(scores(v, l));
        enc_mean[l] = per_layer[l].mean();
      }
      std::vector<double> mask;
      if (first.voxel_mask_path) {
        const Matrix m = load_matrix_file(*first.voxel_mask_path);
        mask.assign(m.values().begin(), m.values().end());
      }
      profiles["encoding"] = profile_json({enc_mean, OptVec(n_layers)});
      json vox = nullptr;
      try {
        const auto vc = voxelwise_id_correlation(per_layer, id_profile, mask);
        vox = {{"mean", vc.mean},
               {"masked_mean", nullable(vc.masked_mean)},
               {"per_voxel", vc.per_voxel},
               {"flagged_voxels", vc.flagged_voxels}};
      } catch (const std::exception& e) {
        record_error("voxelwise Id correlation", e.what());
      }
      model["encoding"] = {{"n_voxels", scores.rows()}, {"voxelwise_id_correlation", vox}};
      LayerProfile p;
      p.metric_name = "encoding";
      p.layer_indices = layer_indices;
      p.values = enc_mean;
      encoding_profile_opt = std::move(p);
    } catch (const std::exception& e) {
      record_error("encoding", e.what());
    }
  }
  model["profiles"] = std::move(profiles);

  // Phase analysis.
  model["phase"] = nullptr;
  if (n_layers < 2) {
    warnings.push_back("insufficient layers for phase detection (need at least 2)");
  } else {
    try {
      const PhaseReport ph = detect_phase_transition(
          id_profile, surprisal_profile_opt ? &*surprisal_profile_opt : nullptr,
          encoding_profile_opt ? &*encoding_profile_opt : nullptr, {config.n_perm, config.seed});
      auto opt_int = [](const std::optional<int>& v) { return v ? json(*v) : json(nullptr); };
      model["phase"] = {{"peak_id_layer", ph.peak_id_layer},
                        {"peak_encoding_layer", opt_int(ph.peak_encoding_layer)},
                        {"surprisal_drop_layer", opt_int(ph.surprisal_drop_layer)},
                        {"correlation_id_encoding", nullable(ph.correlation_id_encoding)},
                        {"permutation_p", nullable(ph.permutation_p)},
                        {"flags", ph.flags}};
    } catch (const std::exception& e) {
      record_error("phase", e.what());
    }
  }

  model["warnings"] = std::move(warnings);
  model["errors"] = std::move(errors);

  result.model = group.model;
  result.checkpoint = group.checkpoint;
  result.layers = layer_indices;
  result.id = id.mean;
  if (encoding_profile_opt) result.encoding = encoding_profile_opt->values;

  timing = {{"knn_and_id", t_knn}, {"linear", t_linear}, {"cka", t_cka}, {"probe", t_probe},
            {"total", seconds_since(t_start)}};
  return model;
}

json checkpoint_series(const std::vector<GroupResult>& results) {
  json out = json::array();
  std::vector<std::string> models;
  for (const auto& r : results) {
    if (r.checkpoint && std::find(models.begin(), models.end(), r.model) == models.end()) {
      models.push_back(r.model);
    }
  }
  for (const auto& name : models) {
    std::vector<const GroupResult*> series;
    for (const auto& r : results) {
      if (r.model == name && r.checkpoint) series.push_back(&r);
    }
    if (series.size() < 2) continue;
    std::sort(series.begin(), series.end(),
              [](const auto* a, const auto* b) { return *a->checkpoint < *b->checkpoint; });
    json entry;
    entry["model_name"] = name;
    json steps = json::array();
    for (const auto* s : series) steps.push_back(*s->checkpoint);
    entry["checkpoints"] = steps;
    json pairs = json::array();
    for (std::size_t i = 0; i + 1 < series.size(); ++i) {
      json r = nullptr;
      try {
        LayerProfile a, b;
        a.metric_name = b.metric_name = "id";
        a.layer_indices = series[i]->layers, a.values = series[i]->id;
        b.layer_indices = series[i + 1]->layers, b.values = series[i + 1]->id;
        r = profile_correlation(a, b);
      } catch (const std::exception&) {
      }
      pairs.push_back({{"from", *series[i]->checkpoint}, {"to", *series[i + 1]->checkpoint}, {"r", r}});
    }
    entry["id_profile_correlations"] = std::move(pairs);

    // Pooled over every (checkpoint, layer) pair with both values.
    std::vector<double> ids, encs;
    for (const auto* s : series) {
      for (std::size_t l = 0; l < s->id.size() && l < s->encoding.size(); ++l) {
        if (s->id[l] && s->encoding[l]) ids.push_back(*s->id[l]), encs.push_back(*s->encoding[l]);
      }
    }
    json global = nullptr;
    if (ids.size() >= 3) {
      auto r = pearson(Eigen::Map<const Eigen::VectorXd>(ids.data(), static_cast<Eigen::Index>(ids.size())),
                       Eigen::Map<const Eigen::VectorXd>(encs.data(), static_cast<Eigen::Index>(encs.size())));
      if (r) global = *r;
    }
    entry["global_id_encoding_correlation"] = global;
    entry["n_pairs"] = ids.size();
    out.push_back(std::move(entry));
  }
  return out;
}

std::string slug(const json& model) {
  std::string s = model["model_name"].get<std::string>();
  if (!model["checkpoint_step"].is_null()) {
    s += "_step" + std::to_string(model["checkpoint_step"].get<std::int64_t>());
  }
  for (char& c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '.') c = '_';
  }
  return s;
}

std::string csv_value(const json& v) {
  if (v.is_null()) return "";
  if (v.is_number_float()) {
    std::ostringstream s;
    s.precision(17);
    s << v.get<double>();
    return s.str();
  }
  return v.dump();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << text;
}

OptVec optvec(const json& arr) {
  OptVec v;
  for (const auto& x : arr) v.push_back(x.is_null() ? std::nullopt : std::optional<double>(x.get<double>()));
  return v;
}

// --------------------------------------------------------------- schema

bool type_matches(const json& v, const std::string& t) {
  if (t == "object") return v.is_object();
  if (t == "array") return v.is_array();
  if (t == "string") return v.is_string();
  if (t == "integer") return v.is_number_integer();
  if (t == "number") return v.is_number();
  if (t == "boolean") return v.is_boolean();
  if (t == "null") return v.is_null();
  return false;
}

void validate_node(const json& v, const json& schema, const json& root, const std::string& path,
                   std::vector<std::string>& errors) {
  if (auto ref = schema.find("$ref"); ref != schema.end()) {
    const std::string target = ref->get<std::string>();
    const json& resolved = root.at(json::json_pointer(target.substr(1)));
    validate_node(v, resolved, root, path, errors);
    return;
  }
  if (auto t = schema.find("type"); t != schema.end()) {
    bool ok = false;
    if (t->is_string()) {
      ok = type_matches(v, t->get<std::string>());
    } else {
      for (const auto& alt : *t) ok = ok || type_matches(v, alt.get<std::string>());
    }
    if (!ok) {
      errors.push_back(path + ": expected type " + t->dump());
      return;
    }
  }
  if (auto e = schema.find("enum"); e != schema.end()) {
    if (std::find(e->begin(), e->end(), v) == e->end()) {
      errors.push_back(path + ": value " + v.dump() + " not in enum");
    }
  }
  if (v.is_object()) {
    if (auto req = schema.find("required"); req != schema.end()) {
      for (const auto& key : *req) {
        if (!v.contains(key.get<std::string>())) {
          errors.push_back(path + ": missing required '" + key.get<std::string>() + "'");
        }
      }
    }
    if (auto props = schema.find("properties"); props != schema.end()) {
      for (const auto& [key, sub] : props->items()) {
        if (v.contains(key)) validate_node(v.at(key), sub, root, path + "/" + key, errors);
      }
    }
  }
  if (v.is_array()) {
    if (auto items = schema.find("items"); items != schema.end()) {
      for (std::size_t i = 0; i < v.size(); ++i) {
        validate_node(v[i], *items, root, path + "/" + std::to_string(i), errors);
      }
    }
  }
}

}  // namespace

const json& report_schema() {
  static const json schema = json::parse(kReportSchemaText);
  return schema;
}

std::vector<std::string> validate_against_schema(const json& doc, const json& schema) {
  std::vector<std::string> errors;
  validate_node(doc, schema, schema, "", errors);
  return errors;
}

json build_report(std::span<const RunManifest> manifests, const ReportConfig& config) {
  if (manifests.empty()) throw ValidationError("report needs at least one manifest");
  const bool previous_mode = deterministic();
  if (config.deterministic) set_deterministic(true);

  json report;
  report["schema_version"] = kReportSchemaVersion;
  report["generator"] = "repgeom 0.1.0";
  report["config"] = config.to_json();
  report["models"] = json::array();
  json timing = json::object();

  std::vector<GroupResult> results;
  for (const auto& group : group_manifests(manifests)) {
    GroupResult result;
    json t;
    try {
      report["models"].push_back(analyse_group(group, config, result, t));
      results.push_back(std::move(result));
    } catch (const std::exception& e) {
      // Whole-model failure still yields a schema-conforming entry.
      json model;
      model["model_name"] = group.model;
      model["checkpoint_step"] = group.checkpoint ? json(*group.checkpoint) : json(nullptr);
      model["manifests"] = json::array();
      model["repeats"] = group.repeats.size();
      model["n_samples"] = group.repeats.front()->n_rows;
      model["layer_indices"] = json::array();
      model["ambient_dims"] = json::array();
      model["scale_analysis"] = {{"k_max", 0}, {"selected_k", nullptr}, {"selection", "none"},
                                 {"window", config.plateau_window}, {"curves", json::array()}};
      const json empty = {{"values", json::array()}, {"std", json::array()}};
      model["profiles"] = {{"id", empty}, {"id_normalized", empty},
                           {"participation_ratio", empty}, {"pca_dim", empty}};
      model["cka"] = nullptr;
      model["surprisal"] = nullptr;
      model["encoding"] = nullptr;
      model["phase"] = nullptr;
      model["warnings"] = json::array();
      model["errors"] = json::array({{{"section", "model"}, {"message", e.what()}}});
      report["models"].push_back(std::move(model));
    }
    if (!config.deterministic) timing[group.model] = t;
  }
  report["checkpoint_series"] = checkpoint_series(results);
  if (!config.deterministic) report["timing_seconds"] = timing;

  set_deterministic(previous_mode);
  return report;
}

void write_report(const json& report, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  write_text(out_dir / "report.json", report.dump(2) + "\n");

  std::ostringstream profiles;
  profiles << "model,checkpoint_step,layer_index,id,id_std,id_normalized,participation_ratio,"
              "pca_dim,surprisal,encoding_mean\n";
  std::ostringstream curves;
  curves << "model,checkpoint_step,layer_index,k,id,id_std\n";

  for (const auto& model : report["models"]) {
    const std::string name = model["model_name"].get<std::string>();
    const std::string step = csv_value(model["checkpoint_step"]);
    const auto& layers = model["layer_indices"];
    const auto& p = model["profiles"];
    auto cell = [&](const char* key, const char* field, std::size_t l) -> std::string {
      if (!p.contains(key)) return "";
      const auto& arr = p[key][field];
      return l < arr.size() ? csv_value(arr[l]) : "";
    };
    for (std::size_t l = 0; l < layers.size(); ++l) {
      profiles << name << ',' << step << ',' << layers[l] << ',' << cell("id", "values", l) << ','
               << cell("id", "std", l) << ',' << cell("id_normalized", "values", l) << ','
               << cell("participation_ratio", "values", l) << ',' << cell("pca_dim", "values", l)
               << ',' << cell("surprisal", "values", l) << ',' << cell("encoding", "values", l)
               << '\n';
    }
    for (const auto& c : model["scale_analysis"]["curves"]) {
      for (const auto& e : c["entries"]) {
        curves << name << ',' << step << ',' << c["layer_index"] << ',' << e["k"] << ','
               << csv_value(e["id"]) << ',' << csv_value(e["id_std"]) << '\n';
      }
    }

    const std::string tag = slug(model);
    if (!model["cka"].is_null()) {
      std::ostringstream cka;
      cka << "layer";
      for (const auto& l : model["cka"]["layer_indices"]) cka << ',' << l;
      cka << '\n';
      std::vector<std::vector<std::optional<double>>> grid;
      for (std::size_t a = 0; a < model["cka"]["values"].size(); ++a) {
        const auto& row = model["cka"]["values"][a];
        cka << model["cka"]["layer_indices"][a];
        for (const auto& v : row) cka << ',' << csv_value(v);
        cka << '\n';
        grid.push_back(optvec(row));
      }
      write_text(out_dir / ("cka_" + tag + ".csv"), cka.str());
      write_text(out_dir / ("cka_" + tag + ".svg"),
                 svg::heatmap("Linear CKA: " + name, layers.get<std::vector<int>>(), grid));
    }

    std::vector<double> x;
    for (const auto& l : layers) x.push_back(l.get<double>());
    std::vector<svg::Series> series;
    for (const char* key : {"id", "participation_ratio", "pca_dim", "surprisal", "encoding"}) {
      if (p.contains(key)) series.push_back({key, optvec(p[key]["values"])});
    }
    if (!x.empty()) {
      write_text(out_dir / ("profiles_" + tag + ".svg"),
                 svg::line_plot("Layer profiles (min-max scaled): " + name, x, series, "layer",
                                true));
    }

    std::vector<svg::Series> scale_series;
    std::vector<double> ks;
    for (const auto& c : model["scale_analysis"]["curves"]) {
      if (ks.empty()) {
        for (const auto& e : c["entries"]) ks.push_back(e["k"].get<double>());
      }
      OptVec ids;
      for (const auto& e : c["entries"]) {
        ids.push_back(e["id"].is_null() ? std::nullopt : std::optional<double>(e["id"].get<double>()));
      }
      scale_series.push_back({"layer " + c["layer_index"].dump(), ids});
    }
    if (!ks.empty()) {
      write_text(out_dir / ("scale_" + tag + ".svg"),
                 svg::line_plot("GRIDE scale analysis: " + name, ks, scale_series, "k (log2)",
                                false, true));
    }
  }
  write_text(out_dir / "profiles.csv", profiles.str());
  write_text(out_dir / "scale_curves.csv", curves.str());
}

}  // namespace repgeom
