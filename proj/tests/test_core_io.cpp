#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <random>

#include "hsiad/io.hpp"

using namespace hsiad;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "hsiad_test_core_io";
  fs::create_directories(dir);
  return dir / name;
}

HsiCube ramp_cube(Index h, Index w, Index l) {
  HsiCube c(h, w, l);
  for (Index k = 0; k < c.pixels().size(); ++k) c.pixels().data()[k] = 0.25 * double(k) - 3.0;
  return c;
}

}  // namespace

TEST_CASE("cube indexing: pixel rows are spectra, bands are contiguous planes") {
  HsiCube c = ramp_cube(2, 3, 4);
  CHECK(c.pixel_count() == 6);
  CHECK(c(1, 2, 3) == c.pixels()(5, 3));
  CHECK(c.band(2)(1, 0) == c(1, 0, 2));
  CHECK(c.pixel(4)(1) == c(1, 1, 1));
  CHECK_THROWS_AS(HsiCube(2, 2, Matrix<double>::Zero(3, 2)), ShapeError);
  CHECK_THROWS_AS(HsiCube(0, 2, 2), ShapeError);
}

TEST_CASE("normalization maps the global range onto [-1, 1]") {
  HsiCube c = ramp_cube(3, 3, 2);
  const HsiCube n = normalize_cube(c);
  CHECK(n.pixels().minCoeff() == -1.0);
  CHECK(n.pixels().maxCoeff() == 1.0);
  CHECK(n.pixels()(4, 0) == doctest::Approx(2.0 * (c.pixels()(4, 0) + 3.0) / (0.25 * 17) - 1.0));
  CHECK((normalize_cube(n).pixels() - n.pixels()).cwiseAbs().maxCoeff() < 1e-15);

  HsiCube flat(2, 2, 3);
  flat.pixels().setConstant(7.0);
  CHECK(normalize_cube(flat).pixels().isZero());
}

TEST_CASE("ENVI round trip through float32") {
  const HsiCube c = ramp_cube(4, 5, 3);
  const auto path = scratch("cube.f32");
  save_cube_envi(c, path);
  CHECK(fs::exists(scratch("cube.hdr")));
  const HsiCube back = load_cube(path, CubeFormat::EnviBsq);
  REQUIRE(back.same_shape(c));
  CHECK((back.pixels() - c.pixels()).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("ENVI int16 with header offset") {
  const auto path = scratch("int16.img");
  {
    std::ofstream h(scratch("int16.hdr"));
    h << "ENVI\nsamples = 2\nlines = 1\nbands = 2\nheader offset = 4\ndata type = 2\ninterleave = bsq\nbyte order = 0\n";
    std::ofstream f(path, std::ios::binary);
    const char pad[4] = {9, 9, 9, 9};
    f.write(pad, 4);
    const std::int16_t v[4] = {1, -2, 300, 4};
    f.write(reinterpret_cast<const char*>(v), sizeof v);
  }
  const HsiCube c = load_cube(path, CubeFormat::EnviBsq);
  CHECK(c.width() == 2);
  CHECK(c(0, 1, 0) == -2.0);
  CHECK(c(0, 0, 1) == 300.0);
}

TEST_CASE("ENVI payload size mismatch is a format error") {
  const auto path = scratch("short.f32");
  save_cube_envi(ramp_cube(2, 2, 2), path);
  fs::resize_file(path, 12);
  CHECK_THROWS_AS(load_cube(path, CubeFormat::EnviBsq), FormatError);
}

TEST_CASE("non-finite payload is rejected with its index") {
  HsiCube c = ramp_cube(2, 2, 2);
  c.pixels()(3, 1) = std::numeric_limits<double>::quiet_NaN();
  const auto path = scratch("nan.f32");
  save_cube_envi(c, path);
  CHECK_THROWS_AS(load_cube(path, CubeFormat::EnviBsq), NonFiniteError);
}

TEST_CASE("CSV cube round trip") {
  const HsiCube c = ramp_cube(3, 2, 4);
  const auto path = scratch("cube.csv");
  save_cube_csv(c, path);
  const HsiCube back = load_cube(path, CubeFormat::Csv);
  REQUIRE(back.same_shape(c));
  CHECK((back.pixels() - c.pixels()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("raster formats round trip; pgm needs a binary raster") {
  Raster<double> r(3, 4);
  for (Index k = 0; k < r.size(); ++k) r.data()[k] = 0.5 * double(k);
  save_raster(r, scratch("r.f32"), RasterFormat::RawF32);
  CHECK((load_raster(scratch("r.f32"), RasterFormat::RawF32) - r).abs().maxCoeff() < 1e-6);
  save_raster(r, scratch("r.csv"), RasterFormat::Csv);
  CHECK((load_raster(scratch("r.csv"), RasterFormat::Csv) - r).abs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(save_raster(r, scratch("r.pgm"), RasterFormat::Pgm), InvalidArgument);

  Mask m = Mask::Zero(3, 4);
  m(1, 2) = 1;
  save_mask(m, scratch("m.pgm"));
  CHECK((load_mask(scratch("m.pgm")) == m).all());
}

TEST_CASE("format names parse; unknown names are rejected") {
  CHECK(parse_cube_format("envi") == CubeFormat::EnviBsq);
  CHECK(parse_cube_format("csv") == CubeFormat::Csv);
  CHECK(parse_raster_format("raw-f32") == RasterFormat::RawF32);
  CHECK_THROWS(parse_cube_format("tiff"));
}
