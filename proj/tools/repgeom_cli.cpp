// repgeom command-line front end.
//
// Exit codes: 0 success, 1 usage error, 2 validation error, 3 numerical failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "repgeom/encoding.hpp"
#include "repgeom/error.hpp"
#include "repgeom/intrinsic_dim.hpp"
#include "repgeom/linear_dim.hpp"
#include "repgeom/manifest.hpp"
#include "repgeom/neighbors.hpp"
#include "repgeom/parallel.hpp"
#include "repgeom/probe.hpp"
#include "repgeom/report.hpp"
#include "repgeom/similarity.hpp"
#include "repgeom/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace repgeom;

namespace {

struct Global {
  std::uint64_t seed = 0;
  int threads = 0;
  bool deterministic = false;
  std::string format = "json";
};

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::string num(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

void emit(const Global& g, const json& doc, const Table& table) {
  if (g.format == "csv") {
    auto line = [](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) std::cout << (i ? "," : "") << cells[i];
      std::cout << '\n';
    };
    line(table.header);
    for (const auto& r : table.rows) line(r);
  } else {
    std::cout << doc.dump(2) << '\n';
  }
}

json estimate_json(const IdEstimate& e) {
  return {{"k", e.k},
          {"id", e.id},
          {"n_used", e.n_used},
          {"log_likelihood", e.log_likelihood},
          {"n_unit_ratios", e.n_unit_ratios},
          {"unit_ratio_warning", e.unit_ratio_warning}};
}

// word_index,onset_seconds; a non-numeric first line is a header.
std::vector<double> read_word_times(const fs::path& path, std::size_t n_words) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open word times: " + path.string());
  std::vector<double> times(n_words, 0.0);
  std::vector<bool> seen(n_words, false);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string a, b;
    if (!std::getline(row, a, ',') || !std::getline(row, b)) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": expected two columns");
    }
    long long idx = 0;
    double t = 0.0;
    try {
      std::size_t used = 0;
      idx = std::stoll(a, &used);
      t = std::stod(b);
    } catch (const std::exception&) {
      if (line_no == 1) continue;
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": not numeric");
    }
    if (idx < 0 || static_cast<std::size_t>(idx) >= n_words) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": word index " +
                            std::to_string(idx) + " outside feature rows");
    }
    times[static_cast<std::size_t>(idx)] = t;
    seen[static_cast<std::size_t>(idx)] = true;
  }
  for (std::size_t w = 0; w < n_words; ++w) {
    if (!seen[w]) throw ValidationError("word times missing word " + std::to_string(w));
    if (w > 0 && !(times[w] > times[w - 1])) {
      throw ValidationError("word times must be strictly ascending (word " + std::to_string(w) + ")");
    }
  }
  return times;
}

void write_word_times(const fs::path& path, const std::vector<double>& times) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << "word_index,onset_seconds\n";
  for (std::size_t w = 0; w < times.size(); ++w) out << w << ',' << num(times[w]) << '\n';
}

// ------------------------------------------------------------- commands

struct IdArgs {
  std::string input;
  std::size_t k_max = 1024;
  std::size_t window = 3;
  std::size_t scale = 0;
  std::string preset;
};

void run_id(const Global& g, const IdArgs& a) {
  const Matrix x = load_matrix_file(a.input);
  const std::size_t k_max = std::min<std::size_t>(a.k_max, x.rows() - 1);
  const auto filtered = filter_degenerate(knn_exact(x, k_max));
  ScaleCurve curve = scale_sweep(filtered.table);
  std::string selection = "plateau";
  if (a.scale > 0) {
    curve.selected_k = a.scale;
    curve.selected_by_override = true;
    selection = "override";
  } else if (!a.preset.empty()) {
    const auto k = scale_preset(a.preset);
    if (!k) throw ValidationError("no scale preset for '" + a.preset + "'");
    curve.selected_k = *k;
    selection = "preset";
  } else {
    curve.selected_k = select_scale(curve, a.window);
  }
  const ScaleEntry* chosen = curve.at(curve.selected_k);
  if (!chosen || !chosen->estimate) {
    throw NumericalError("no valid estimate at k=" + std::to_string(curve.selected_k));
  }

  json entries = json::array();
  Table table{{"k", "id", "n_used", "log_likelihood", "error"}, {}};
  for (const auto& e : curve.entries) {
    if (e.estimate) {
      entries.push_back(estimate_json(*e.estimate));
      table.rows.push_back({std::to_string(e.k), num(e.estimate->id),
                            std::to_string(e.estimate->n_used), num(e.estimate->log_likelihood), ""});
    } else {
      entries.push_back({{"k", e.k}, {"error", e.error}});
      table.rows.push_back({std::to_string(e.k), "", "", "", "\"" + e.error + "\""});
    }
  }
  json doc{{"input", a.input},
           {"n_points", x.rows()},
           {"ambient_dim", x.cols()},
           {"discarded_duplicates", filtered.discarded},
           {"k_max", k_max},
           {"selected_k", curve.selected_k},
           {"selection", selection},
           {"estimate", estimate_json(*chosen->estimate)},
           {"id_normalized", normalize_id(*chosen->estimate, x.cols())},
           {"curve", entries}};
  if (filtered.table.n_points() > 1) {
    const auto twonn = estimate_twonn(mu_ratios(filtered.table, 1));
    doc["twonn"] = twonn.id;
  }
  emit(g, doc, table);
}

void run_lindim(const Global& g, const std::string& input, double threshold) {
  const Matrix x = load_matrix_file(input);
  const auto s = covariance_spectrum(x);
  const double pr = participation_ratio(s);
  const std::size_t pca = pca_effective_dim(s, threshold);
  Table table{{"rank", "eigenvalue"}, {}};
  for (std::size_t i = 0; i < s.eigenvalues.size(); ++i) {
    table.rows.push_back({std::to_string(i + 1), num(s.eigenvalues[i])});
  }
  emit(g,
       {{"input", input},
        {"n_points", x.rows()},
        {"ambient_dim", x.cols()},
        {"participation_ratio", pr},
        {"pca_dim", pca},
        {"threshold", threshold},
        {"total_variance", s.total_variance},
        {"eigenvalues", s.eigenvalues}},
       table);
}

void run_cka(const Global& g, const std::vector<std::string>& inputs, const std::string& manifest) {
  std::vector<Matrix> layers;
  std::vector<std::string> labels;
  if (!manifest.empty()) {
    const auto m = load_manifest(manifest);
    for (const auto& l : m.layers) {
      layers.push_back(load_matrix_file(l.matrix_path));
      labels.push_back(std::to_string(l.layer_index));
    }
  }
  for (const auto& p : inputs) {
    layers.push_back(load_matrix_file(p));
    labels.push_back(p);
  }
  if (layers.empty()) throw ValidationError("cka needs matrices or --manifest");
  const CkaMatrix c = cka_matrix(layers);
  json values = json::array();
  Table table{{"layer"}, {}};
  for (const auto& l : labels) table.header.push_back(l);
  for (std::size_t a = 0; a < c.n_layers; ++a) {
    json row = json::array();
    std::vector<std::string> cells{labels[a]};
    for (std::size_t b = 0; b < c.n_layers; ++b) {
      const auto v = c(a, b);
      row.push_back(v ? json(*v) : json(nullptr));
      cells.push_back(v ? num(*v) : "");
    }
    values.push_back(row);
    table.rows.push_back(cells);
  }
  emit(g, {{"layers", labels}, {"values", values}, {"flags", c.flags}}, table);
}

struct EncodeArgs {
  std::string features, word_times, responses, out;
  double tr = 2.0;
  std::vector<int> delays = kDefaultDelays;
  std::size_t folds = 5, chunk = 20, trim_start = 10, trim_end = 5;
  int lobes = 3;
  int layer_index = 0;
};

void run_encode(const Global& g, const EncodeArgs& a) {
  const Matrix f = load_matrix_file(a.features);
  const Matrix r = load_matrix_file(a.responses);
  StimulusFeatures stim{read_word_times(a.word_times, f.rows()), f.to_eigen()};
  DesignConfig dc;
  dc.tr = a.tr;
  dc.delays = a.delays;
  dc.lobes = a.lobes;
  dc.trim_start = a.trim_start;
  dc.trim_end = a.trim_end;
  const Eigen::MatrixXd x = build_design(stim, r.rows(), dc);
  const Eigen::MatrixXd y = trim_rows(r.to_eigen(), a.trim_start, a.trim_end);
  RidgeConfig rc;
  rc.n_folds = a.folds;
  rc.chunk_trs = a.chunk;
  rc.seed = g.seed;
  RidgeFit fit = ridge_fit_cv(x, y, rc);
  fit.scores.layer_index = a.layer_index;
  if (!a.out.empty()) {
    std::vector<double> s(fit.scores.per_voxel.begin(), fit.scores.per_voxel.end());
    write_matrix(Matrix(s.size(), 1, s), a.out);
  }
  Table table{{"voxel", "r", "alpha"}, {}};
  for (std::size_t v = 0; v < fit.scores.per_voxel.size(); ++v) {
    table.rows.push_back({std::to_string(v), num(fit.scores.per_voxel[v]),
                          num(fit.scores.alpha_per_voxel[v])});
  }
  emit(g,
       {{"layer_index", a.layer_index},
        {"n_trs_used", x.rows()},
        {"n_predictors", x.cols()},
        {"mean_r", fit.scores.mean()},
        {"per_voxel", fit.scores.per_voxel},
        {"alpha_per_voxel", fit.scores.alpha_per_voxel},
        {"flagged_voxels", fit.scores.flagged_voxels},
        {"cv_scheme", {{"n_folds", rc.n_folds}, {"chunk_trs", rc.chunk_trs}, {"seed", rc.seed}}}},
       table);
}

void run_probe(const Global& g, const std::string& manifest_path, double train_fraction,
               bool bits) {
  const auto m = load_manifest(manifest_path);
  const auto p = surprisal_profile(m, train_fraction, g.seed);
  const double unit = bits ? 1.0 / std::log(2.0) : 1.0;
  std::vector<double> s;
  Table table{{"layer_index", "surprisal", "probe_residual"}, {}};
  for (std::size_t l = 0; l < p.surprisal.size(); ++l) {
    s.push_back(p.surprisal[l] * unit);
    table.rows.push_back({std::to_string(p.layer_indices[l]), num(s.back()),
                          num(p.probe_residual[l])});
  }
  emit(g,
       {{"model_name", m.model_name},
        {"units", bits ? "bits" : "nats"},
        {"layer_indices", p.layer_indices},
        {"surprisal", s},
        {"probe_residual", p.probe_residual},
        {"n_train", p.n_train},
        {"n_validation", p.n_validation},
        {"standardized_norm", p.standardized_norm},
        {"warnings", p.warnings}},
       table);
}

void run_report(const Global& g, const std::vector<std::string>& manifests,
                const std::string& config_path, const std::string& out_dir) {
  ReportConfig config = config_path.empty() ? ReportConfig{} : load_report_config(config_path);
  config.seed = g.seed;
  config.deterministic = config.deterministic || g.deterministic;
  std::vector<RunManifest> loaded;
  for (const auto& m : manifests) loaded.push_back(load_manifest(m));
  const json report = build_report(loaded, config);
  const auto problems = validate_against_schema(report, report_schema());
  if (!problems.empty()) {
    for (const auto& p : problems) std::cerr << "schema: " << p << '\n';
    throw ValidationError("report failed schema validation");
  }
  write_report(report, out_dir);
  std::size_t n_errors = 0;
  for (const auto& m : report["models"]) n_errors += m["errors"].size();
  std::cerr << "wrote " << (fs::path(out_dir) / "report.json").string() << " ("
            << report["models"].size() << " model(s), " << n_errors << " section error(s))\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Representational geometry of layer activations"};
  app.require_subcommand(1);
  Global g;
  app.add_option("--seed", g.seed, "Random seed")->default_val(0);
  app.add_option("--threads", g.threads, "Worker threads (0 = hardware default)");
  app.add_flag("--deterministic", g.deterministic, "Single-threaded, bit-reproducible run");
  app.add_option("--format", g.format, "Output format")
      ->check(CLI::IsMember({"json", "csv"}))
      ->default_val("json");

  IdArgs id_args;
  auto* id = app.add_subcommand("id", "GRIDE scale sweep and intrinsic dimension of one matrix");
  id->add_option("input", id_args.input, "Matrix file (.lmrx or .npy)")->required();
  id->add_option("--k-max", id_args.k_max, "Largest neighbour rank")->default_val(1024);
  id->add_option("--window", id_args.window, "Plateau window")->default_val(3);
  id->add_option("--scale", id_args.scale, "Use this k instead of the plateau rule");
  id->add_option("--preset", id_args.preset, "Use the published scale of this model");

  std::string lin_input;
  double threshold = 0.99;
  auto* lin = app.add_subcommand("lindim", "PCA cutoff dimension and participation ratio");
  lin->add_option("input", lin_input, "Matrix file")->required();
  lin->add_option("--threshold", threshold, "Explained-variance cutoff")
      ->default_val(0.99)
      ->check(CLI::Range(0.0, 1.0));

  std::vector<std::string> cka_inputs;
  std::string cka_manifest;
  auto* cka = app.add_subcommand("cka", "Linear CKA matrix between layers");
  cka->add_option("inputs", cka_inputs, "Matrix files");
  cka->add_option("--manifest", cka_manifest, "Take layers from a run manifest");

  EncodeArgs enc_args;
  auto* enc = app.add_subcommand("encode", "Cross-validated ridge encoding model");
  enc->add_option("--features", enc_args.features, "W x F word feature matrix")->required();
  enc->add_option("--word-times", enc_args.word_times, "CSV of word_index,onset_seconds")
      ->required();
  enc->add_option("--responses", enc_args.responses, "T x V response matrix")->required();
  enc->add_option("--tr", enc_args.tr, "Repetition time in seconds")->default_val(2.0);
  enc->add_option("--delays", enc_args.delays, "FIR delays in TRs")->default_val(kDefaultDelays);
  enc->add_option("--lobes", enc_args.lobes, "Lanczos lobes")->default_val(3);
  enc->add_option("--folds", enc_args.folds, "Cross-validation folds")->default_val(5);
  enc->add_option("--chunk-trs", enc_args.chunk, "TRs per CV chunk")->default_val(20);
  enc->add_option("--trim-start", enc_args.trim_start, "TRs dropped at story start")
      ->default_val(10);
  enc->add_option("--trim-end", enc_args.trim_end, "TRs dropped at story end")->default_val(5);
  enc->add_option("--layer-index", enc_args.layer_index, "Layer label for the scores");
  enc->add_option("--out", enc_args.out, "Write per-voxel scores as a V x 1 container");

  std::string probe_manifest;
  double train_fraction = 0.8;
  bool bits = false;
  auto* probe = app.add_subcommand("probe", "Layerwise surprisal through affine probes");
  probe->add_option("manifest", probe_manifest, "Run manifest")->required();
  probe->add_option("--train-fraction", train_fraction)->default_val(0.8)->check(
      CLI::Range(0.0, 1.0));
  probe->add_flag("--bits", bits, "Report bits instead of nats");

  auto* synth = app.add_subcommand("synth", "Synthetic data generators");
  synth->require_subcommand(1);
  ManifoldSpec spec;
  std::string kind = "hypercube", synth_out;
  auto* manifold = synth->add_subcommand("manifold", "Point cloud of known intrinsic dimension");
  manifold->add_option("--kind", kind, "hypercube|sphere|gaussian|swiss_roll|low_rank|torus")
      ->default_val("hypercube");
  manifold->add_option("-d,--intrinsic-dim", spec.intrinsic_dim)->default_val(2);
  manifold->add_option("-D,--ambient-dim", spec.ambient_dim)->default_val(2);
  manifold->add_option("-n,--n-points", spec.n_points)->default_val(1000);
  manifold->add_option("--noise", spec.noise)->default_val(0.0);
  manifold->add_option("--out", synth_out, "Output container")->required();
  bool float32 = false;
  manifold->add_flag("--float32", float32, "Store as float32");

  FixtureConfig fixture;
  std::string fixture_dir;
  auto* fix = synth->add_subcommand("fixture", "Tiny exported-model stand-in with manifests");
  fix->add_option("--out-dir", fixture_dir)->required();
  fix->add_option("--name", fixture.model_name)->default_val("fixture-tiny");
  fix->add_option("--layers", fixture.n_layers)->default_val(8);
  fix->add_option("--samples", fixture.n_samples)->default_val(2000);
  fix->add_option("--hidden", fixture.hidden)->default_val(32);
  fix->add_option("--vocab", fixture.vocab)->default_val(64);
  fix->add_option("--repeats", fixture.repeats)->default_val(1);
  std::int64_t fixture_step = -1;
  fix->add_option("--checkpoint-step", fixture_step);

  StoryConfig story;
  std::string story_dir;
  auto* st = synth->add_subcommand("story", "Synthetic word features and voxel responses");
  st->add_option("--out-dir", story_dir)->required();
  st->add_option("--trs", story.n_trs)->default_val(300);
  st->add_option("--features", story.n_features)->default_val(8);
  st->add_option("--voxels", story.n_voxels)->default_val(20);
  st->add_option("--tr", story.tr)->default_val(2.0);
  st->add_option("--noise-sd", story.noise_sd)->default_val(1.0);

  std::vector<std::string> report_manifests;
  std::string report_config, report_out;
  auto* rep = app.add_subcommand("report", "Full analysis report over run manifests");
  rep->add_option("manifests", report_manifests, "Run manifests")->required();
  rep->add_option("--config", report_config, "Report config JSON");
  rep->add_option("--out", report_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    set_thread_count(g.threads);
    set_deterministic(g.deterministic);
    if (*id) {
      run_id(g, id_args);
    } else if (*lin) {
      run_lindim(g, lin_input, threshold);
    } else if (*cka) {
      run_cka(g, cka_inputs, cka_manifest);
    } else if (*enc) {
      run_encode(g, enc_args);
    } else if (*probe) {
      run_probe(g, probe_manifest, train_fraction, bits);
    } else if (*manifold) {
      const auto k = parse_manifold_kind(kind);
      if (!k) throw ValidationError("unknown manifold kind '" + kind + "'");
      spec.kind = *k;
      spec.seed = g.seed;
      Matrix m = synth_manifold(spec);
      if (float32) {
        m = Matrix(m.rows(), m.cols(), {m.values().begin(), m.values().end()}, DType::Float32);
      }
      write_matrix(m, synth_out);
    } else if (*fix) {
      fixture.seed = g.seed;
      if (fixture_step >= 0) fixture.checkpoint_step = fixture_step;
      for (const auto& p : write_fixture_model(fixture, fixture_dir)) std::cout << p.string() << '\n';
    } else if (*st) {
      story.seed = g.seed;
      const auto s = synth_story(story);
      fs::create_directories(story_dir);
      const fs::path dir(story_dir);
      write_matrix(Matrix::from_eigen(s.stimulus.features), dir / "features.lmrx");
      write_word_times(dir / "word_times.csv", s.stimulus.times);
      write_matrix(Matrix::from_eigen(s.responses.values), dir / "responses.lmrx");
      write_matrix(Matrix::from_eigen(s.true_weights), dir / "true_weights.lmrx");
      std::cout << dir.string() << '\n';
    } else if (*rep) {
      run_report(g, report_manifests, report_config, report_out);
    }
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
