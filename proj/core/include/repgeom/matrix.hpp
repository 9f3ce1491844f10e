#pragma once

// Dense activation matrices and their on-disk container.
//
// Layout of a container file (all integers little-endian):
//
//   offset  size  field
//   0       4     magic "LMRX"
//   4       1     version (1)
//   5       1     dtype code (0 = float32, 1 = float64)
//   6       2     reserved, zero
//   8       8     rows (uint64)
//   16      8     cols (uint64)
//   24      ...   rows*cols values, row-major
//
// Metadata never goes into the header; it lives in the run manifest.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace repgeom {

enum class DType : std::uint8_t { Float32 = 0, Float64 = 1 };

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr std::size_t kContainerHeaderBytes = 24;

/// Immutable N x D matrix of values in row-major order.
///
/// Values are held as double regardless of dtype; a Float32 matrix stores
/// values already rounded to single precision, so converting back on write is
/// exact and the file round-trips bit-for-bit.
class Matrix {
 public:
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
         DType dtype = DType::Float64);

  static Matrix from_eigen(const Eigen::Ref<const Eigen::MatrixXd>& m,
                           DType dtype = DType::Float64);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  DType dtype() const noexcept { return dtype_; }

  std::span<const double> values() const noexcept { return values_; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {values_.data() + r * cols_, cols_};
  }
  double operator()(std::size_t r, std::size_t c) const noexcept {
    return values_[r * cols_ + c];
  }

  Eigen::Map<const RowMatrix> view() const noexcept {
    return {values_.data(), static_cast<Eigen::Index>(rows_),
            static_cast<Eigen::Index>(cols_)};
  }
  Eigen::MatrixXd to_eigen() const { return view(); }

  /// Throws ValidationError naming the first non-finite coordinate.
  void require_finite(std::string_view context = {}) const;

  /// Row subset in the given order.
  Matrix select_rows(std::span<const std::size_t> indices) const;

  friend bool operator==(const Matrix& a, const Matrix& b) noexcept;

 private:
  std::size_t rows_;
  std::size_t cols_;
  DType dtype_;
  std::vector<double> values_;
};

/// Writes the container. Rejects non-finite values.
void write_matrix(const Matrix& m, const std::filesystem::path& path);

/// Reads a container, validating magic, version, dtype, length and finiteness.
Matrix read_matrix(const std::filesystem::path& path);

/// Reads a single-array ".npy" file (little-endian f4/f8, C order, 1-D or 2-D).
/// A 1-D array of length n becomes an n x 1 matrix.
Matrix read_npy(const std::filesystem::path& path);

/// Dispatches on extension: ".npy" goes through read_npy, anything else is a
/// container.
Matrix load_matrix_file(const std::filesystem::path& path);

}  // namespace repgeom
