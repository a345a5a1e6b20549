#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "kra/matrix.hpp"

namespace kra {

// MATX v1 layout: "MATX", u32 version, u64 rows, u64 cols, then rows*cols
// doubles in row-major order. All integers and doubles little-endian.
inline constexpr char kMatxMagic[4] = {'M', 'A', 'T', 'X'};
inline constexpr std::uint32_t kMatxVersion = 1;

struct Crop {
  std::size_t row0 = 0, col0 = 0, rows = 0, cols = 0;
  friend bool operator==(const Crop&, const Crop&) = default;
};

void write_matx(std::ostream& out, const DenseMatrix& m);
DenseMatrix read_matx(std::istream& in);

void save_matrix(const std::string& path, const DenseMatrix& m);

// Reads a MATX file, or a comma-separated text file when the path ends in
// ".csv". Throws IoError, FormatError or CropOutOfBounds.
DenseMatrix load_matrix(const std::string& path, const std::optional<Crop>& crop = std::nullopt);

// One matrix row per non-empty line, values separated by commas.
DenseMatrix parse_csv_matrix(std::istream& in);

DenseMatrix apply_crop(const DenseMatrix& m, const Crop& crop);

}  // namespace kra
