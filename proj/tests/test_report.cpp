#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "repgeom/error.hpp"
#include "repgeom/manifest.hpp"
#include "repgeom/report.hpp"
#include "repgeom/synth.hpp"

using namespace repgeom;
using nlohmann::json;

namespace {

std::vector<RunManifest> fixture(const oracle::TempDir& dir, std::size_t layers, std::size_t samples,
                                 std::size_t repeats = 1, std::optional<std::int64_t> step = {}) {
  FixtureConfig cfg;
  cfg.n_layers = layers;
  cfg.n_samples = samples;
  cfg.repeats = repeats;
  cfg.checkpoint_step = step;
  std::vector<RunManifest> out;
  for (const auto& p : write_fixture_model(cfg, dir.path())) out.push_back(load_manifest(p));
  return out;
}

ReportConfig quick_config() {
  ReportConfig c;
  c.n_perm = 200;
  c.deterministic = true;
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(ReportConfig, ParsesAndRejectsUnknownKeys) {
  const auto c = ReportConfig::from_json(json{{"k_max", 64}, {"scale_override", 8}, {"log_base", 2.0},
                                              {"surprisal_bits", true}, {"n_perm", 50}});
  EXPECT_EQ(c.k_max, 64u);
  EXPECT_EQ(c.scale_override, 8u);
  EXPECT_EQ(c.log_base, 2.0);
  EXPECT_TRUE(c.surprisal_bits);
  EXPECT_EQ(c.n_perm, 50u);
  EXPECT_THROW(ReportConfig::from_json(json{{"kmax", 64}}), ValidationError);
  const auto back = ReportConfig::from_json([&] {
    json j = c.to_json();
    j.erase("cv_scheme");
    return j;
  }());
  EXPECT_EQ(back.k_max, c.k_max);
  EXPECT_EQ(back.scale_override, c.scale_override);
}

TEST(ReportConfig, LoadsFromFile) {
  oracle::TempDir dir("report");
  std::ofstream(dir / "c.json") << R"({"seed": 5, "pca_threshold": 0.9})";
  const auto c = load_report_config(dir / "c.json");
  EXPECT_EQ(c.seed, 5u);
  EXPECT_EQ(c.pca_threshold, 0.9);
}

TEST(Report, FixtureReportIsSchemaValidAndComplete) {
  oracle::TempDir dir("report");
  const auto manifests = fixture(dir, 5, 500, 2);
  const json r = build_report(manifests, quick_config());
  EXPECT_TRUE(validate_against_schema(r, report_schema()).empty());
  ASSERT_EQ(r["models"].size(), 1u);
  const json& m = r["models"][0];
  EXPECT_EQ(m["repeats"], 2);
  EXPECT_TRUE(m["errors"].empty()) << m["errors"].dump();
  for (const char* key : {"id", "id_normalized", "participation_ratio", "pca_dim", "surprisal"}) {
    ASSERT_TRUE(m["profiles"].contains(key)) << key;
    EXPECT_EQ(m["profiles"][key]["values"].size(), 5u) << key;
  }
  EXPECT_EQ(m["cka"]["values"].size(), 5u);
  EXPECT_EQ(m["scale_analysis"]["curves"].size(), 5u);
  EXPECT_FALSE(m["phase"].is_null());
  EXPECT_FALSE(r.contains("timing_seconds"));
}

TEST(Report, SingleLayerModel) {
  oracle::TempDir dir("report");
  const json r = build_report(fixture(dir, 1, 300), quick_config());
  EXPECT_TRUE(validate_against_schema(r, report_schema()).empty());
  const json& m = r["models"][0];
  EXPECT_EQ(m["cka"]["values"].size(), 1u);
  EXPECT_NEAR(m["cka"]["values"][0][0].get<double>(), 1.0, 1e-9);
  EXPECT_TRUE(m["phase"].is_null());
  EXPECT_FALSE(m["warnings"].empty());
}

TEST(Report, IdenticalCheckpointsCorrelatePerfectly) {
  oracle::TempDir dir("report");
  auto manifests = fixture(dir, 4, 400, 1, 1000);
  RunManifest later = manifests[0];
  later.checkpoint_step = 2000;
  manifests.push_back(later);
  const json r = build_report(manifests, quick_config());
  ASSERT_EQ(r["models"].size(), 2u);
  ASSERT_EQ(r["checkpoint_series"].size(), 1u);
  const json& s = r["checkpoint_series"][0];
  EXPECT_EQ(s["checkpoints"], json::array({1000, 2000}));
  EXPECT_EQ(s["id_profile_correlations"][0]["r"].get<double>(), 1.0);
}

TEST(Report, ScaleOverrideAndPresetSelection) {
  oracle::TempDir dir("report");
  auto cfg = quick_config();
  cfg.scale_override = 4;
  json r = build_report(fixture(dir, 3, 300), cfg);
  EXPECT_EQ(r["models"][0]["scale_analysis"]["selected_k"], 4);
  EXPECT_EQ(r["models"][0]["scale_analysis"]["selection"], "override");

  oracle::TempDir dir2("report");
  auto manifests = fixture(dir2, 3, 300);
  manifests[0].model_name = "opt-1.3b";
  r = build_report(manifests, quick_config());
  EXPECT_EQ(r["models"][0]["scale_analysis"]["selected_k"], 32);
  EXPECT_EQ(r["models"][0]["scale_analysis"]["selection"], "preset");
}

TEST(Report, SurprisalUnits) {
  oracle::TempDir dir("report");
  const auto manifests = fixture(dir, 3, 300);
  auto cfg = quick_config();
  const json nats = build_report(manifests, cfg);
  cfg.surprisal_bits = true;
  const json bits = build_report(manifests, cfg);
  EXPECT_EQ(bits["models"][0]["surprisal"]["units"], "bits");
  const double n0 = nats["models"][0]["profiles"]["surprisal"]["values"][0];
  const double b0 = bits["models"][0]["profiles"]["surprisal"]["values"][0];
  EXPECT_NEAR(b0, n0 / std::log(2.0), 1e-12);
}

TEST(Report, EncodingScoresExtension) {
  oracle::TempDir dir("report");
  auto manifests = fixture(dir, 4, 400);
  // V x L scores that rise and fall with layer.
  std::vector<double> v;
  for (int vox = 0; vox < 6; ++vox)
    for (double base : {0.1, 0.3, 0.25, 0.05}) v.push_back(base + 0.01 * vox);
  write_matrix(Matrix(6, 4, v), dir / "enc.lmrx");
  write_matrix(Matrix(6, 1, {1, 1, 0, 1, 0, 1}), dir / "mask.lmrx");
  manifests[0].encoding_scores_path = dir / "enc.lmrx";
  manifests[0].voxel_mask_path = dir / "mask.lmrx";
  const json r = build_report(manifests, quick_config());
  EXPECT_TRUE(validate_against_schema(r, report_schema()).empty());
  const json& m = r["models"][0];
  EXPECT_TRUE(m["errors"].empty()) << m["errors"].dump();
  EXPECT_EQ(m["encoding"]["n_voxels"], 6);
  EXPECT_EQ(m["profiles"]["encoding"]["values"].size(), 4u);
  EXPECT_EQ(m["phase"]["peak_encoding_layer"], 1);
  EXPECT_FALSE(m["encoding"]["voxelwise_id_correlation"]["masked_mean"].is_null());
}

TEST(Report, BrokenLayerIsRecordedNotThrown) {
  oracle::TempDir dir("report");
  auto manifests = fixture(dir, 3, 300);
  manifests[0].unembedding_path = dir / "missing.lmrx";
  const json r = build_report(manifests, quick_config());
  EXPECT_TRUE(validate_against_schema(r, report_schema()).empty());
  EXPECT_FALSE(r["models"][0]["errors"].empty());
  EXPECT_FALSE(r["models"][0]["profiles"]["id"]["values"].empty());
}

TEST(Report, DeterministicRunsAreBitIdentical) {
  oracle::TempDir dir("report");
  const auto manifests = fixture(dir, 4, 400);
  EXPECT_EQ(build_report(manifests, quick_config()).dump(), build_report(manifests, quick_config()).dump());
}

TEST(Report, WritesTablesAndPlots) {
  oracle::TempDir dir("report");
  const json r = build_report(fixture(dir, 4, 400), quick_config());
  const auto out = dir / "out";
  write_report(r, out);
  for (const char* f : {"report.json", "profiles.csv", "scale_curves.csv", "cka_fixture-tiny.csv",
                        "cka_fixture-tiny.svg", "profiles_fixture-tiny.svg", "scale_fixture-tiny.svg"}) {
    EXPECT_TRUE(std::filesystem::exists(out / f)) << f;
  }
  EXPECT_EQ(json::parse(slurp(out / "report.json")), r);
  const std::string csv = slurp(out / "profiles.csv");
  EXPECT_EQ(csv.rfind("model,checkpoint_step,layer_index,id,", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  EXPECT_NE(slurp(out / "cka_fixture-tiny.svg").find("<svg"), std::string::npos);
}

TEST(Schema, ValidatorCatchesViolations) {
  oracle::TempDir dir("report");
  const json good = build_report(fixture(dir, 3, 300), quick_config());
  json missing = good;
  missing.erase("models");
  EXPECT_FALSE(validate_against_schema(missing, report_schema()).empty());
  json wrong_type = good;
  wrong_type["models"][0]["repeats"] = "two";
  EXPECT_FALSE(validate_against_schema(wrong_type, report_schema()).empty());
  json bad_enum = good;
  bad_enum["models"][0]["scale_analysis"]["selection"] = "guess";
  EXPECT_FALSE(validate_against_schema(bad_enum, report_schema()).empty());
}

TEST(Schema, SmallSchemaSemantics) {
  const json schema = json::parse(R"({
    "type": "object", "required": ["a"],
    "properties": {"a": {"type": "array", "items": {"type": ["number", "null"]}},
                   "b": {"$ref": "#/definitions/e"}},
    "definitions": {"e": {"enum": ["x", "y"]}}})");
  EXPECT_TRUE(validate_against_schema(json::parse(R"({"a": [1, null, 2.5]})"), schema).empty());
  EXPECT_TRUE(validate_against_schema(json::parse(R"({"a": [], "b": "y"})"), schema).empty());
  EXPECT_FALSE(validate_against_schema(json::parse(R"({"a": ["s"]})"), schema).empty());
  EXPECT_FALSE(validate_against_schema(json::parse(R"({"a": [], "b": "z"})"), schema).empty());
  EXPECT_FALSE(validate_against_schema(json::parse(R"({"b": "x"})"), schema).empty());
}
