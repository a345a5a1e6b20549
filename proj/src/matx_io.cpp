#include "kra/matx_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "kra/error.hpp"
#include "kra/linalg.hpp"

namespace kra {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <class T>
T to_little(T value) {
  if constexpr (std::endian::native == std::endian::little) {
    return value;
  } else {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
}

template <class T>
void put(std::ostream& out, T value) {
  const T le = to_little(value);
  out.write(reinterpret_cast<const char*>(&le), sizeof(T));
}

template <class T>
bool get(std::istream& in, T& value) {
  T raw;
  if (!in.read(reinterpret_cast<char*>(&raw), sizeof(T))) return false;
  value = to_little(raw);
  return true;
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

void write_matx(std::ostream& out, const DenseMatrix& m) {
  out.write(kMatxMagic, 4);
  put<std::uint32_t>(out, kMatxVersion);
  put<std::uint64_t>(out, m.rows());
  put<std::uint64_t>(out, m.cols());
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(m.data().data()),
              static_cast<std::streamsize>(m.size() * sizeof(double)));
  } else {
    for (double x : m.data()) put<double>(out, x);
  }
}

DenseMatrix read_matx(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMatxMagic, 4) != 0) {
    fail(ErrorCode::kFormatError, "matx: bad magic");
  }
  std::uint32_t version = 0;
  std::uint64_t rows = 0, cols = 0;
  if (!get(in, version)) fail(ErrorCode::kFormatError, "matx: truncated header");
  if (version != kMatxVersion) {
    fail(ErrorCode::kFormatError, "matx: unsupported version " + std::to_string(version));
  }
  if (!get(in, rows) || !get(in, cols)) fail(ErrorCode::kFormatError, "matx: truncated header");
  if (rows == 0 || cols == 0) fail(ErrorCode::kFormatError, "matx: zero dimension");
  if (rows > kMaxElements || cols > kMaxElements / rows) {
    fail(ErrorCode::kFormatError, "matx: dimensions exceed the element limit");
  }
  DenseMatrix m(rows, cols);
  const auto bytes = static_cast<std::streamsize>(m.size() * sizeof(double));
  if (!in.read(reinterpret_cast<char*>(m.data().data()), bytes)) {
    fail(ErrorCode::kFormatError, "matx: payload shorter than rows*cols doubles");
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    fail(ErrorCode::kFormatError, "matx: trailing bytes after payload");
  }
  if constexpr (std::endian::native != std::endian::little) {
    for (double& x : m.data()) x = to_little(x);
  }
  return m;
}

void save_matrix(const std::string& path, const DenseMatrix& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIoError, "cannot open " + path + " for writing");
  write_matx(out, m);
  out.flush();
  if (!out) fail(ErrorCode::kIoError, "write failed: " + path);
}

DenseMatrix parse_csv_matrix(std::istream& in) {
  std::vector<double> values;
  std::size_t rows = 0, cols = 0;
  std::string line;
  while (std::getline(in, line)) {
    std::string_view rest = trim(line);
    if (rest.empty() || rest.front() == '#') continue;
    std::size_t count = 0;
    while (true) {
      const auto comma = rest.find(',');
      const std::string_view cell = trim(rest.substr(0, comma));
      double x = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), x);
      if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty()) {
        fail(ErrorCode::kFormatError, "csv: bad number '" + std::string(cell) + "' on row " +
                                          std::to_string(rows + 1));
      }
      values.push_back(x);
      ++count;
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
    if (rows == 0) {
      cols = count;
    } else if (count != cols) {
      fail(ErrorCode::kFormatError, "csv: row " + std::to_string(rows + 1) + " has " +
                                        std::to_string(count) + " values, expected " +
                                        std::to_string(cols));
    }
    ++rows;
  }
  if (rows == 0) fail(ErrorCode::kFormatError, "csv: no rows");
  DenseMatrix m(rows, cols);
  std::copy(values.begin(), values.end(), m.data().begin());
  if (!m.all_finite()) fail(ErrorCode::kFormatError, "csv: non-finite value");
  return m;
}

DenseMatrix apply_crop(const DenseMatrix& m, const Crop& crop) {
  if (crop.rows == 0 || crop.cols == 0 || crop.row0 > m.rows() || crop.col0 > m.cols() ||
      crop.rows > m.rows() - crop.row0 || crop.cols > m.cols() - crop.col0) {
    std::ostringstream msg;
    msg << "crop (" << crop.row0 << "," << crop.col0 << "," << crop.rows << "," << crop.cols
        << ") does not fit a " << m.rows() << "x" << m.cols() << " matrix";
    fail(ErrorCode::kCropOutOfBounds, msg.str());
  }
  return block(m, crop.row0, crop.col0, crop.rows, crop.cols);
}

DenseMatrix load_matrix(const std::string& path, const std::optional<Crop>& crop) {
  const bool csv = ends_with(path, ".csv");
  std::ifstream in(path, csv ? std::ios::in : std::ios::binary);
  if (!in) fail(ErrorCode::kIoError, "cannot open " + path);
  DenseMatrix m = csv ? parse_csv_matrix(in) : read_matx(in);
  if (!m.all_finite()) fail(ErrorCode::kFormatError, path + ": non-finite entries");
  return crop ? apply_crop(m, *crop) : m;
}

}  // namespace kra
