#include "hsiad/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

namespace hsiad {

static_assert(std::endian::native == std::endian::little, "little-endian host required");

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::vector<char> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

std::ofstream open_out(const fs::path& path, bool binary) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw FormatError("cannot write " + path.string());
  return out;
}

double parse_double(std::string_view token, const fs::path& path) {
  const std::string t = trim(token);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size())
    throw FormatError(path.string() + ": bad number '" + t + "'");
  return v;
}

long parse_long(const std::string& s, const std::string& key) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw FormatError("header field '" + key + "' is not an integer: '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  return out;
}

// "key = value" lines; brace-delimited values may span lines.
std::map<std::string, std::string> parse_envi_header(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open ENVI header " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != "ENVI")
    throw FormatError(path.string() + ": missing ENVI magic line");
  std::map<std::string, std::string> fields;
  while (std::getline(in, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = lower(trim(line.substr(0, eq)));
    std::string value = trim(line.substr(eq + 1));
    if (!value.empty() && value.front() == '{') {
      while (value.find('}') == std::string::npos && std::getline(in, line)) value += " " + trim(line);
    }
    fields[key] = value;
  }
  return fields;
}

const std::string& require(const std::map<std::string, std::string>& fields, const std::string& key) {
  auto it = fields.find(key);
  if (it == fields.end()) throw FormatError("ENVI header lacks '" + key + "'");
  return it->second;
}

template <typename Derived>
void reject_non_finite(const Eigen::DenseBase<Derived>& values, const fs::path& path) {
  const Index bad = first_non_finite(values);
  if (bad >= 0)
    throw NonFiniteError(path.string() + ": non-finite value at element " + std::to_string(bad));
}

fs::path raster_sidecar(const fs::path& path) { return fs::path(path.string() + ".hdr"); }

}  // namespace

CubeFormat parse_cube_format(std::string_view name) {
  if (name == "envi" || name == "envi-bsq") return CubeFormat::EnviBsq;
  if (name == "csv") return CubeFormat::Csv;
  throw InvalidArgument("unknown cube format '" + std::string(name) + "'");
}

RasterFormat parse_raster_format(std::string_view name) {
  if (name == "raw-f32" || name == "f32") return RasterFormat::RawF32;
  if (name == "csv") return RasterFormat::Csv;
  if (name == "pgm") return RasterFormat::Pgm;
  throw InvalidArgument("unknown raster format '" + std::string(name) + "'");
}

fs::path envi_header_path(const fs::path& payload) {
  fs::path replaced = payload;
  replaced.replace_extension(".hdr");
  if (replaced != payload && fs::exists(replaced)) return replaced;
  fs::path appended(payload.string() + ".hdr");
  if (fs::exists(appended)) return appended;
  return replaced;
}

namespace {

HsiCube load_envi(const fs::path& path) {
  const auto fields = parse_envi_header(envi_header_path(path));
  const long width = parse_long(require(fields, "samples"), "samples");
  const long height = parse_long(require(fields, "lines"), "lines");
  const long bands = parse_long(require(fields, "bands"), "bands");
  const long dtype = parse_long(require(fields, "data type"), "data type");
  if (width < 1 || height < 1 || bands < 1) throw FormatError("ENVI dimensions must be positive");
  if (auto it = fields.find("interleave"); it != fields.end() && lower(it->second) != "bsq")
    throw FormatError("unsupported interleave '" + it->second + "' (only bsq)");
  if (auto it = fields.find("byte order"); it != fields.end() && parse_long(it->second, "byte order") != 0)
    throw FormatError("unsupported big-endian byte order");
  long offset = 0;
  if (auto it = fields.find("header offset"); it != fields.end()) offset = parse_long(it->second, "header offset");
  if (dtype != 4 && dtype != 2) throw FormatError("unsupported ENVI data type " + std::to_string(dtype));

  const std::size_t elem = dtype == 4 ? 4 : 2;
  const std::size_t count = static_cast<std::size_t>(width) * height * bands;
  const auto bytes = read_bytes(path);
  if (bytes.size() < static_cast<std::size_t>(offset) || bytes.size() - offset != count * elem)
    throw FormatError("payload size mismatch: header implies " + std::to_string(count * elem) +
                      " bytes, file holds " + std::to_string(bytes.size() - std::min<std::size_t>(offset, bytes.size())));

  HsiCube cube(height, width, bands);
  double* out = cube.pixels().data();  // band-sequential
  const char* src = bytes.data() + offset;
  for (std::size_t k = 0; k < count; ++k) {
    if (dtype == 4) {
      float v;
      std::memcpy(&v, src + k * 4, 4);
      out[k] = v;
    } else {
      std::int16_t v;
      std::memcpy(&v, src + k * 2, 2);
      out[k] = v;
    }
  }
  reject_non_finite(cube.pixels(), path);
  return cube;
}

HsiCube load_csv_cube(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line).rfind('#', 0) != 0)
    throw FormatError(path.string() + ": missing '# lines=.. samples=.. bands=..' header");
  std::map<std::string, long> dims;
  for (const auto& tok : split(trim(line).substr(1), ' ')) {
    auto eq = tok.find('=');
    if (eq == std::string::npos) continue;
    dims[lower(trim(tok.substr(0, eq)))] = parse_long(trim(tok.substr(eq + 1)), tok.substr(0, eq));
  }
  for (const char* key : {"lines", "samples", "bands"})
    if (!dims.count(key) || dims[key] < 1) throw FormatError(path.string() + ": header lacks positive '" + key + "'");
  const long height = dims["lines"], width = dims["samples"], bands = dims["bands"];

  HsiCube cube(height, width, bands);
  Index row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto cells = split(line, ';');
    if (static_cast<long>(cells.size()) != bands)
      throw FormatError(path.string() + ": row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                        " values, expected " + std::to_string(bands));
    if (row >= cube.pixel_count()) throw FormatError(path.string() + ": more rows than lines*samples");
    for (long b = 0; b < bands; ++b) cube.pixels()(row, b) = parse_double(cells[b], path);
    ++row;
  }
  if (row != cube.pixel_count())
    throw FormatError(path.string() + ": payload size mismatch, " + std::to_string(row) + " rows for " +
                      std::to_string(cube.pixel_count()) + " pixels");
  reject_non_finite(cube.pixels(), path);
  return cube;
}

}  // namespace

HsiCube load_cube(const fs::path& path, CubeFormat format) {
  return format == CubeFormat::EnviBsq ? load_envi(path) : load_csv_cube(path);
}

void save_cube_envi(const HsiCube& cube, const fs::path& path) {
  fs::path hdr = path;
  hdr.replace_extension(".hdr");
  if (hdr == path) hdr = fs::path(path.string() + ".hdr");
  {
    auto out = open_out(hdr, false);
    out << "ENVI\nsamples = " << cube.width() << "\nlines = " << cube.height() << "\nbands = " << cube.bands()
        << "\nheader offset = 0\nfile type = ENVI Standard\ndata type = 4\ninterleave = bsq\nbyte order = 0\n";
  }
  auto out = open_out(path, true);
  const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic> f = cube.pixels().cast<float>();
  out.write(reinterpret_cast<const char*>(f.data()), static_cast<std::streamsize>(f.size() * sizeof(float)));
}

void save_cube_csv(const HsiCube& cube, const fs::path& path) {
  auto out = open_out(path, false);
  out.precision(17);
  out << "# lines=" << cube.height() << " samples=" << cube.width() << " bands=" << cube.bands() << "\n";
  for (Index i = 0; i < cube.pixel_count(); ++i) {
    for (Index b = 0; b < cube.bands(); ++b) out << (b ? ";" : "") << cube.pixels()(i, b);
    out << "\n";
  }
}

void save_raster(const Raster<double>& raster, const fs::path& path, RasterFormat format) {
  switch (format) {
    case RasterFormat::RawF32: {
      {
        auto hdr = open_out(raster_sidecar(path), false);
        hdr << "width = " << raster.cols() << "\nheight = " << raster.rows() << "\n";
      }
      auto out = open_out(path, true);
      const Raster<float> f = raster.cast<float>();
      out.write(reinterpret_cast<const char*>(f.data()), static_cast<std::streamsize>(f.size() * sizeof(float)));
      break;
    }
    case RasterFormat::Csv: {
      auto out = open_out(path, false);
      out.precision(17);
      for (Index r = 0; r < raster.rows(); ++r) {
        for (Index c = 0; c < raster.cols(); ++c) out << (c ? ";" : "") << raster(r, c);
        out << "\n";
      }
      break;
    }
    case RasterFormat::Pgm:
      if (!is_binary(raster)) throw InvalidArgument("pgm output requires a binary raster");
      save_mask(raster.cast<std::uint8_t>(), path);
      break;
  }
}

void save_mask(const Mask& mask, const fs::path& path) {
  if (!is_binary(mask)) throw InvalidArgument("pgm output requires a binary raster");
  auto out = open_out(path, true);
  out << "P5\n" << mask.cols() << " " << mask.rows() << "\n255\n";
  const Mask scaled = mask * std::uint8_t(255);
  out.write(reinterpret_cast<const char*>(scaled.data()), static_cast<std::streamsize>(scaled.size()));
}

Raster<double> load_raster(const fs::path& path, RasterFormat format) {
  switch (format) {
    case RasterFormat::RawF32: {
      std::ifstream hdr(raster_sidecar(path));
      if (!hdr) throw FormatError("missing raster header " + raster_sidecar(path).string());
      long width = -1, height = -1;
      std::string line;
      while (std::getline(hdr, line)) {
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = lower(trim(line.substr(0, eq)));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "width") width = parse_long(value, key);
        if (key == "height") height = parse_long(value, key);
      }
      if (width < 1 || height < 1) throw FormatError(path.string() + ": raster header lacks width/height");
      const auto bytes = read_bytes(path);
      if (bytes.size() != static_cast<std::size_t>(width * height) * sizeof(float))
        throw FormatError(path.string() + ": payload size mismatch");
      Raster<float> f(height, width);
      std::memcpy(f.data(), bytes.data(), bytes.size());
      reject_non_finite(f, path);
      return f.cast<double>();
    }
    case RasterFormat::Csv: {
      std::ifstream in(path);
      if (!in) throw FormatError("cannot open " + path.string());
      std::vector<std::vector<double>> rows;
      std::string line;
      while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        std::vector<double> row;
        for (const auto& cell : split(line, ';')) row.push_back(parse_double(cell, path));
        if (!rows.empty() && row.size() != rows.front().size()) throw FormatError(path.string() + ": ragged rows");
        rows.push_back(std::move(row));
      }
      if (rows.empty()) throw FormatError(path.string() + ": empty raster");
      Raster<double> r(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
      for (Index i = 0; i < r.rows(); ++i)
        for (Index j = 0; j < r.cols(); ++j) r(i, j) = rows[i][j];
      reject_non_finite(r, path);
      return r;
    }
    case RasterFormat::Pgm:
      return load_mask(path).cast<double>();
  }
  throw InvalidArgument("unknown raster format");
}

Mask load_mask(const fs::path& path) {
  const auto bytes = read_bytes(path);
  std::size_t pos = 0;
  auto next_token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    std::string tok;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) tok += bytes[pos++];
    return tok;
  };
  if (next_token() != "P5") throw FormatError(path.string() + ": not a binary PGM (P5)");
  const long width = parse_long(next_token(), "width");
  const long height = parse_long(next_token(), "height");
  const long maxval = parse_long(next_token(), "maxval");
  if (width < 1 || height < 1 || maxval != 255) throw FormatError(path.string() + ": unsupported PGM header");
  ++pos;  // single whitespace before the payload
  if (bytes.size() - pos != static_cast<std::size_t>(width * height))
    throw FormatError(path.string() + ": payload size mismatch");
  Mask mask(height, width);
  for (Index k = 0; k < mask.size(); ++k) {
    const auto v = static_cast<unsigned char>(bytes[pos + k]);
    if (v != 0 && v != 255) throw FormatError(path.string() + ": non-binary pixel at " + std::to_string(k));
    mask.data()[k] = v == 255 ? 1 : 0;
  }
  return mask;
}

}  // namespace hsiad
