#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "repgeom/matrix.hpp"

namespace repgeom {

/// Linear CKA between two representations of the same N samples:
/// ||Yc' Xc||_F^2 / (||Xc' Xc||_F ||Yc' Yc||_F) with column-centred Xc, Yc.
double linear_cka(const Matrix& x, const Matrix& y);

/// Symmetric layer x layer CKA. Pairs involving a zero-variance layer are
/// masked (empty) and listed in `flags`.
struct CkaMatrix {
  std::size_t n_layers = 0;
  std::vector<std::optional<double>> values;  // row-major n_layers x n_layers
  std::vector<std::string> flags;

  std::optional<double> operator()(std::size_t a, std::size_t b) const {
    return values[a * n_layers + b];
  }
};

CkaMatrix cka_matrix(std::span<const Matrix> layers);

}  // namespace repgeom
