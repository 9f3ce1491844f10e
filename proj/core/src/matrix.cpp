#include "repgeom/matrix.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "repgeom/error.hpp"

namespace repgeom {
namespace {

constexpr std::array<char, 4> kMagic{'L', 'M', 'R', 'X'};
constexpr std::uint8_t kVersion = 1;

template <typename T>
void put_le(std::vector<unsigned char>& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  auto bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<unsigned char>(bits >> (8 * i)));
  }
}

template <typename T>
T get_le(const unsigned char* p) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    bits |= static_cast<U>(p[i]) << (8 * i);
  }
  return std::bit_cast<T>(bits);
}

std::size_t element_size(DType dtype) { return dtype == DType::Float32 ? 4 : 8; }

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values, DType dtype)
    : rows_(rows), cols_(cols), dtype_(dtype), values_(std::move(values)) {
  if (rows_ == 0 || cols_ == 0) {
    throw ValidationError("matrix must have at least one row and one column");
  }
  if (values_.size() != rows_ * cols_) {
    std::ostringstream msg;
    msg << "matrix data length " << values_.size() << " does not match " << rows_ << "x"
        << cols_;
    throw ValidationError(msg.str());
  }
  if (dtype_ == DType::Float32) {
    for (double& v : values_) v = static_cast<double>(static_cast<float>(v));
  }
}

Matrix Matrix::from_eigen(const Eigen::Ref<const Eigen::MatrixXd>& m, DType dtype) {
  std::vector<double> values(static_cast<std::size_t>(m.size()));
  Eigen::Map<RowMatrix>(values.data(), m.rows(), m.cols()) = m;
  return Matrix(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()),
                std::move(values), dtype);
}

void Matrix::require_finite(std::string_view context) const {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      std::ostringstream msg;
      if (!context.empty()) msg << context << ": ";
      msg << "non-finite value at row " << i / cols_ << ", col " << i % cols_;
      throw ValidationError(msg.str());
    }
  }
}

Matrix Matrix::select_rows(std::span<const std::size_t> indices) const {
  std::vector<double> out;
  out.reserve(indices.size() * cols_);
  for (std::size_t r : indices) {
    if (r >= rows_) throw ValidationError("row index out of range");
    auto src = row(r);
    out.insert(out.end(), src.begin(), src.end());
  }
  return Matrix(indices.size(), cols_, std::move(out), dtype_);
}

bool operator==(const Matrix& a, const Matrix& b) noexcept {
  if (a.rows_ != b.rows_ || a.cols_ != b.cols_ || a.dtype_ != b.dtype_) return false;
  // Bitwise, so that -0.0 and 0.0 are distinguished like the file bytes are.
  return std::memcmp(a.values_.data(), b.values_.data(), a.values_.size() * sizeof(double)) ==
         0;
}

void write_matrix(const Matrix& m, const std::filesystem::path& path) {
  m.require_finite(path.string());

  std::vector<unsigned char> bytes;
  bytes.reserve(kContainerHeaderBytes + m.values().size() * element_size(m.dtype()));
  bytes.insert(bytes.end(), kMagic.begin(), kMagic.end());
  bytes.push_back(kVersion);
  bytes.push_back(static_cast<unsigned char>(m.dtype()));
  bytes.push_back(0);
  bytes.push_back(0);
  put_le(bytes, static_cast<std::uint64_t>(m.rows()));
  put_le(bytes, static_cast<std::uint64_t>(m.cols()));
  if (m.dtype() == DType::Float32) {
    for (double v : m.values()) put_le(bytes, static_cast<float>(v));
  } else {
    for (double v : m.values()) put_le(bytes, v);
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ValidationError("write failed: " + path.string());
}

Matrix read_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open matrix file: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  const std::string where = path.string();

  if (bytes.size() < kContainerHeaderBytes) {
    throw ValidationError(where + ": truncated header");
  }
  if (std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
    throw ValidationError(where + ": bad magic (expected LMRX)");
  }
  if (bytes[4] != kVersion) {
    throw ValidationError(where + ": unsupported version " + std::to_string(bytes[4]));
  }
  if (bytes[5] > 1) {
    throw ValidationError(where + ": unsupported dtype code " + std::to_string(bytes[5]));
  }
  const auto dtype = static_cast<DType>(bytes[5]);
  const auto rows = get_le<std::uint64_t>(bytes.data() + 8);
  const auto cols = get_le<std::uint64_t>(bytes.data() + 16);
  if (rows == 0 || cols == 0) throw ValidationError(where + ": zero-sized matrix");

  const std::size_t esize = element_size(dtype);
  const std::size_t payload = bytes.size() - kContainerHeaderBytes;
  std::uint64_t count = 0;
  if (__builtin_mul_overflow(rows, cols, &count) || count > payload / esize ||
      count * esize != payload) {
    std::ostringstream msg;
    msg << where << (count * esize > payload ? ": truncated payload" : ": trailing bytes")
        << ", header declares " << rows << "x" << cols << " but payload holds "
        << payload / esize << " values";
    throw ValidationError(msg.str());
  }

  std::vector<double> values(rows * cols);
  const unsigned char* p = bytes.data() + kContainerHeaderBytes;
  for (std::size_t i = 0; i < values.size(); ++i, p += esize) {
    values[i] = dtype == DType::Float32 ? static_cast<double>(get_le<float>(p))
                                        : get_le<double>(p);
  }
  Matrix m(rows, cols, std::move(values), dtype);
  m.require_finite(where);
  return m;
}

Matrix load_matrix_file(const std::filesystem::path& path) {
  if (path.extension() == ".npy") return read_npy(path);
  return read_matrix(path);
}

}  // namespace repgeom
