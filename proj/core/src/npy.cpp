#include <bit>
#include <cstring>
#include <fstream>
#include <regex>

#include "repgeom/error.hpp"
#include "repgeom/matrix.hpp"

namespace repgeom {

Matrix read_npy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open npy file: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  const std::string where = path.string();

  if (bytes.size() < 10 || bytes[0] != 0x93 || std::memcmp(bytes.data() + 1, "NUMPY", 5) != 0) {
    throw ValidationError(where + ": not an npy file");
  }
  const unsigned major = bytes[6];
  std::size_t header_len = 0;
  std::size_t offset = 0;
  if (major == 1) {
    header_len = bytes[8] | (bytes[9] << 8);
    offset = 10;
  } else if (major == 2 || major == 3) {
    if (bytes.size() < 12) throw ValidationError(where + ": truncated npy header");
    header_len = bytes[8] | (bytes[9] << 8) | (bytes[10] << 16) |
                 (static_cast<std::size_t>(bytes[11]) << 24);
    offset = 12;
  } else {
    throw ValidationError(where + ": unsupported npy version");
  }
  if (bytes.size() < offset + header_len) throw ValidationError(where + ": truncated npy header");
  const std::string header(bytes.begin() + static_cast<std::ptrdiff_t>(offset),
                           bytes.begin() + static_cast<std::ptrdiff_t>(offset + header_len));

  std::smatch m;
  if (!std::regex_search(header, m, std::regex(R"('descr'\s*:\s*'([<>|=]?)(f[48])')"))) {
    throw ValidationError(where + ": npy dtype must be float32 or float64");
  }
  if (m[1] == ">") throw ValidationError(where + ": big-endian npy not supported");
  const bool f32 = m[2] == "f4";
  if (std::regex_search(header, std::regex(R"('fortran_order'\s*:\s*True)"))) {
    throw ValidationError(where + ": Fortran-ordered npy not supported");
  }
  if (!std::regex_search(header, m, std::regex(R"('shape'\s*:\s*\(([^)]*)\))"))) {
    throw ValidationError(where + ": npy header missing shape");
  }
  std::vector<std::size_t> shape;
  const std::string dims = m[1];
  std::regex num(R"(\d+)");
  for (auto it = std::sregex_iterator(dims.begin(), dims.end(), num);
       it != std::sregex_iterator(); ++it) {
    shape.push_back(std::stoull(it->str()));
  }
  if (shape.empty() || shape.size() > 2) {
    throw ValidationError(where + ": npy array must be 1-D or 2-D");
  }
  const std::size_t rows = shape[0];
  const std::size_t cols = shape.size() == 2 ? shape[1] : 1;
  const std::size_t esize = f32 ? 4 : 8;
  const std::size_t data_offset = offset + header_len;
  if (bytes.size() - data_offset != rows * cols * esize) {
    throw ValidationError(where + ": npy payload length does not match shape");
  }

  std::vector<double> values(rows * cols);
  const unsigned char* p = bytes.data() + data_offset;
  for (std::size_t i = 0; i < values.size(); ++i, p += esize) {
    if (f32) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(p[b]) << (8 * b);
      values[i] = static_cast<double>(std::bit_cast<float>(bits));
    } else {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(p[b]) << (8 * b);
      values[i] = std::bit_cast<double>(bits);
    }
  }
  Matrix out(rows, cols, std::move(values), f32 ? DType::Float32 : DType::Float64);
  out.require_finite(where);
  return out;
}

}  // namespace repgeom
