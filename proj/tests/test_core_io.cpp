#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "repgeom/error.hpp"
#include "repgeom/manifest.hpp"
#include "repgeom/matrix.hpp"

using namespace repgeom;
namespace fs = std::filesystem;

namespace {

std::vector<unsigned char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const fs::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::uint64_t le64(const std::vector<unsigned char>& b, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[at + static_cast<std::size_t>(i)];
  return v;
}

void write_json(const fs::path& p, const nlohmann::json& j) { std::ofstream(p) << j.dump(2); }

}  // namespace

TEST(Container, Float64LayoutIsByteExact) {
  oracle::TempDir dir("io");
  write_matrix(Matrix(2, 3, {1, 2, 3, 4, 5, 6}), dir / "m.lmrx");
  const auto b = slurp(dir / "m.lmrx");
  ASSERT_EQ(b.size(), 72u);
  EXPECT_EQ(std::string(b.begin(), b.begin() + 4), "LMRX");
  EXPECT_EQ(b[4], 1);
  EXPECT_EQ(b[5], 1);
  EXPECT_EQ(b[6], 0);
  EXPECT_EQ(b[7], 0);
  EXPECT_EQ(le64(b, 8), 2u);
  EXPECT_EQ(le64(b, 16), 3u);
  for (int i = 0; i < 6; ++i) {
    EXPECT_EQ(std::bit_cast<double>(le64(b, 24 + 8 * static_cast<std::size_t>(i))), i + 1.0);
  }
}

TEST(Container, Float32ScalarIs28Bytes) {
  oracle::TempDir dir("io");
  write_matrix(Matrix(1, 1, {0.0}, DType::Float32), dir / "z.lmrx");
  const auto b = slurp(dir / "z.lmrx");
  ASSERT_EQ(b.size(), 28u);
  EXPECT_EQ(b[5], 0);
  EXPECT_EQ(b[24] | b[25] | b[26] | b[27], 0);
}

TEST(Container, RejectsNonFiniteOnWrite) {
  oracle::TempDir dir("io");
  const Matrix m(1, 2, {1.0, std::numeric_limits<double>::quiet_NaN()});
  EXPECT_THROW(write_matrix(m, dir / "nan.lmrx"), ValidationError);
}

TEST(Container, RoundTripsBothDtypesBitExactly) {
  oracle::TempDir dir("io");
  for (auto dtype : {DType::Float32, DType::Float64}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const Eigen::MatrixXd x = oracle::gaussian(7 + static_cast<Eigen::Index>(seed), 5, seed) * 1e3;
      const Matrix m = Matrix::from_eigen(x, dtype);
      write_matrix(m, dir / "rt.lmrx");
      const Matrix back = read_matrix(dir / "rt.lmrx");
      EXPECT_TRUE(back == m);
      EXPECT_EQ(back.dtype(), dtype);
      write_matrix(back, dir / "rt2.lmrx");
      EXPECT_EQ(slurp(dir / "rt.lmrx"), slurp(dir / "rt2.lmrx"));
    }
  }
}

TEST(Container, Float32ValuesAreRoundedOnConstruction) {
  const Matrix m(1, 1, {0.1}, DType::Float32);
  EXPECT_EQ(m(0, 0), static_cast<double>(0.1f));
}

TEST(Container, BadMagic) {
  oracle::TempDir dir("io");
  write_matrix(Matrix(1, 1, {1.0}), dir / "m.lmrx");
  auto b = slurp(dir / "m.lmrx");
  std::memcpy(b.data(), "XXXX", 4);
  spit(dir / "m.lmrx", b);
  try {
    read_matrix(dir / "m.lmrx");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("magic"), std::string::npos);
  }
}

TEST(Container, TruncatedPayload) {
  oracle::TempDir dir("io");
  std::vector<double> v(50, 1.0);
  write_matrix(Matrix(5, 10, v), dir / "m.lmrx");
  auto b = slurp(dir / "m.lmrx");
  // Declare 10 x 10 while only 50 values follow.
  b[8] = 10;
  spit(dir / "m.lmrx", b);
  try {
    read_matrix(dir / "m.lmrx");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("trunc"), std::string::npos) << e.what();
  }
}

TEST(Container, UnsupportedDtypeAndVersion) {
  oracle::TempDir dir("io");
  write_matrix(Matrix(1, 1, {1.0}), dir / "m.lmrx");
  auto b = slurp(dir / "m.lmrx");
  b[5] = 7;
  spit(dir / "d.lmrx", b);
  EXPECT_THROW(read_matrix(dir / "d.lmrx"), ValidationError);
  b[5] = 1;
  b[4] = 2;
  spit(dir / "v.lmrx", b);
  EXPECT_THROW(read_matrix(dir / "v.lmrx"), ValidationError);
}

TEST(Container, NonFiniteOnReadNamesCoordinates) {
  oracle::TempDir dir("io");
  write_matrix(Matrix(2, 2, {1, 2, 3, 4}), dir / "m.lmrx");
  auto b = slurp(dir / "m.lmrx");
  const auto inf = std::bit_cast<std::uint64_t>(std::numeric_limits<double>::infinity());
  for (int i = 0; i < 8; ++i) b[24 + 24 + static_cast<std::size_t>(i)] = (inf >> (8 * i)) & 0xff;
  spit(dir / "m.lmrx", b);
  try {
    read_matrix(dir / "m.lmrx");
    FAIL();
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("row 1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("col 1"), std::string::npos) << msg;
  }
}

TEST(Container, ZeroSizeRejected) {
  EXPECT_THROW(Matrix(0, 3, {}), ValidationError);
  EXPECT_THROW(Matrix(2, 2, {1, 2, 3}), ValidationError);
}

TEST(Npy, ReadsFloat64TwoDimensional) {
  oracle::TempDir dir("io");
  std::string header = "{'descr': '<f8', 'fortran_order': False, 'shape': (2, 3), }";
  while ((10 + header.size() + 1) % 64 != 0) header += ' ';
  header += '\n';
  std::vector<unsigned char> b{0x93, 'N', 'U', 'M', 'P', 'Y', 1, 0};
  b.push_back(static_cast<unsigned char>(header.size() & 0xff));
  b.push_back(static_cast<unsigned char>(header.size() >> 8));
  b.insert(b.end(), header.begin(), header.end());
  for (int i = 0; i < 6; ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(0.5 * i);
    for (int k = 0; k < 8; ++k) b.push_back((bits >> (8 * k)) & 0xff);
  }
  spit(dir / "a.npy", b);
  const Matrix m = load_matrix_file(dir / "a.npy");
  ASSERT_EQ(m.rows(), 2u);
  ASSERT_EQ(m.cols(), 3u);
  EXPECT_EQ(m(1, 2), 2.5);
}

TEST(Npy, ReadsFloat32OneDimensionalAsColumn) {
  oracle::TempDir dir("io");
  std::string header = "{'descr': '<f4', 'fortran_order': False, 'shape': (3,), }";
  while ((10 + header.size() + 1) % 64 != 0) header += ' ';
  header += '\n';
  std::vector<unsigned char> b{0x93, 'N', 'U', 'M', 'P', 'Y', 1, 0};
  b.push_back(static_cast<unsigned char>(header.size()));
  b.push_back(0);
  b.insert(b.end(), header.begin(), header.end());
  for (float f : {1.5f, -2.0f, 3.25f}) {
    const auto bits = std::bit_cast<std::uint32_t>(f);
    for (int k = 0; k < 4; ++k) b.push_back((bits >> (8 * k)) & 0xff);
  }
  spit(dir / "v.npy", b);
  const Matrix m = read_npy(dir / "v.npy");
  EXPECT_EQ(m.rows(), 3u);
  EXPECT_EQ(m.cols(), 1u);
  EXPECT_EQ(m(2, 0), 3.25);
  EXPECT_EQ(m.dtype(), DType::Float32);
}

TEST(Npy, RejectsFortranOrder) {
  oracle::TempDir dir("io");
  std::string header = "{'descr': '<f8', 'fortran_order': True, 'shape': (1, 1), }\n";
  std::vector<unsigned char> b{0x93, 'N', 'U', 'M', 'P', 'Y', 1, 0,
                               static_cast<unsigned char>(header.size()), 0};
  b.insert(b.end(), header.begin(), header.end());
  for (int k = 0; k < 8; ++k) b.push_back(0);
  spit(dir / "f.npy", b);
  EXPECT_THROW(read_npy(dir / "f.npy"), ValidationError);
}

class ManifestTest : public ::testing::Test {
 protected:
  oracle::TempDir dir{"manifest"};

  nlohmann::json base(const std::vector<int>& order) {
    nlohmann::json layers = nlohmann::json::array();
    for (int l : order) {
      layers.push_back({{"layer_index", l}, {"matrix_path", "layer_" + std::to_string(l) + ".lmrx"}});
    }
    return {{"model_name", "toy"},
            {"checkpoint_step", nullptr},
            {"sample_meta", {{"n_contexts", 100}, {"context_words", 20}, {"seed", 1}}},
            {"layers", layers}};
  }

  void write_layers(std::size_t n, std::vector<std::size_t> rows) {
    for (std::size_t l = 0; l < n; ++l) {
      write_matrix(oracle::to_matrix(oracle::gaussian(static_cast<Eigen::Index>(rows[l]), 64, l)),
                   dir / ("layer_" + std::to_string(l) + ".lmrx"));
    }
  }
};

TEST_F(ManifestTest, ValidThreeLayerManifest) {
  write_layers(3, {100, 100, 100});
  write_json(dir / "m.json", base({0, 1, 2}));
  const RunManifest m = load_manifest(dir / "m.json");
  EXPECT_EQ(m.model_name, "toy");
  EXPECT_EQ(m.layers.size(), 3u);
  EXPECT_EQ(m.n_rows, 100u);
  EXPECT_FALSE(m.checkpoint_step.has_value());
  EXPECT_TRUE(m.layers[2].matrix_path.is_absolute());
}

TEST_F(ManifestTest, LayerOrderMustIncrease) {
  write_layers(3, {100, 100, 100});
  write_json(dir / "m.json", base({0, 2, 1}));
  EXPECT_THROW(load_manifest(dir / "m.json"), ValidationError);
}

TEST_F(ManifestTest, RowCountMismatch) {
  write_layers(2, {100, 99});
  write_json(dir / "m.json", base({0, 1}));
  try {
    load_manifest(dir / "m.json");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("mismatch"), std::string::npos);
  }
}

TEST_F(ManifestTest, MissingFile) {
  write_layers(1, {100});
  write_json(dir / "m.json", base({0, 1}));
  EXPECT_THROW(load_manifest(dir / "m.json"), ValidationError);
}

TEST_F(ManifestTest, SchemaViolations) {
  write_layers(1, {100});
  auto j = base({0});
  j.erase("model_name");
  write_json(dir / "a.json", j);
  EXPECT_THROW(load_manifest(dir / "a.json"), ValidationError);
  j = base({0});
  j["checkpoint_step"] = "late";
  write_json(dir / "b.json", j);
  EXPECT_THROW(load_manifest(dir / "b.json"), ValidationError);
  std::ofstream(dir / "c.json") << "{ not json";
  EXPECT_THROW(load_manifest(dir / "c.json"), ValidationError);
}

TEST_F(ManifestTest, TargetLengthMustMatchRows) {
  write_layers(1, {100});
  write_matrix(Matrix(99, 1, std::vector<double>(99, 1.0)), dir / "targets.lmrx");
  auto j = base({0});
  j["target_ids_path"] = "targets.lmrx";
  write_json(dir / "m.json", j);
  EXPECT_THROW(load_manifest(dir / "m.json"), ValidationError);
}

TEST_F(ManifestTest, SaveThenLoadPreservesFields) {
  write_layers(2, {100, 100});
  write_matrix(Matrix(100, 1, std::vector<double>(100, 3.0)), dir / "targets.lmrx");
  auto j = base({0, 1});
  j["checkpoint_step"] = 4000;
  j["target_ids_path"] = "targets.lmrx";
  write_json(dir / "m.json", j);
  const RunManifest m = load_manifest(dir / "m.json");
  save_manifest(m, dir / "copy.json");
  const RunManifest back = load_manifest(dir / "copy.json");
  EXPECT_EQ(back.checkpoint_step, 4000);
  EXPECT_EQ(back.layers.size(), 2u);
  EXPECT_EQ(back.target_ids_path, m.target_ids_path);
  std::ifstream in(dir / "copy.json");
  const auto saved = nlohmann::json::parse(in);
  EXPECT_EQ(saved["layers"][0]["matrix_path"], "layer_0.lmrx");
}
