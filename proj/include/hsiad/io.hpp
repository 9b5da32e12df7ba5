#ifndef HSIAD_IO_HPP
#define HSIAD_IO_HPP

#include <filesystem>
#include <string_view>

#include "hsiad/core.hpp"

namespace hsiad {

enum class CubeFormat { EnviBsq, Csv };
enum class RasterFormat { RawF32, Csv, Pgm };

CubeFormat parse_cube_format(std::string_view name);
RasterFormat parse_raster_format(std::string_view name);

/// ENVI (float32/int16, BSQ, little-endian) or CSV cube.
///
/// The ENVI header is looked up as the payload path with its extension
/// replaced by ".hdr", then as the payload path with ".hdr" appended. CSV cubes
/// start with a "# lines=<M1> samples=<M2> bands=<L>" line followed by one
/// pixel per row in lexicographic order, band values separated by ';'.
HsiCube load_cube(const std::filesystem::path& path, CubeFormat format);

/// Writes float32 payload to `path` and its header next to it (.hdr).
void save_cube_envi(const HsiCube& cube, const std::filesystem::path& path);
void save_cube_csv(const HsiCube& cube, const std::filesystem::path& path);

/// raw-f32 writes `path` plus a "<path>.hdr" sidecar carrying width/height.
/// pgm requires a binary raster (0 -> 0, 1 -> 255).
void save_raster(const Raster<double>& raster, const std::filesystem::path& path, RasterFormat format);
void save_mask(const Mask& mask, const std::filesystem::path& path);

Raster<double> load_raster(const std::filesystem::path& path, RasterFormat format);
Mask load_mask(const std::filesystem::path& path);

std::filesystem::path envi_header_path(const std::filesystem::path& payload);

}  // namespace hsiad

#endif  // HSIAD_IO_HPP
