#include "doctest.h"

#include <random>

#include "hsiad/rem.hpp"

using namespace hsiad;

namespace {

Raster<double> random_raster(Index h, Index w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Raster<double> r(h, w);
  for (Index k = 0; k < r.size(); ++k) r.data()[k] = u(rng);
  return r;
}

// Window max/min over a size x size square with clamped coordinates.
Raster<double> brute(const Raster<double>& r, Index size, bool take_max) {
  const Index half = size / 2;
  Raster<double> out(r.rows(), r.cols());
  for (Index y = 0; y < r.rows(); ++y)
    for (Index x = 0; x < r.cols(); ++x) {
      double v = take_max ? -1e300 : 1e300;
      for (Index dy = -half; dy <= half; ++dy)
        for (Index dx = -half; dx <= half; ++dx) {
          const double s = r(std::clamp<Index>(y + dy, 0, r.rows() - 1), std::clamp<Index>(x + dx, 0, r.cols() - 1));
          v = take_max ? std::max(v, s) : std::min(v, s);
        }
      out(y, x) = v;
    }
  return out;
}

}  // namespace

TEST_CASE("REM is the per-pixel squared distance") {
  HsiCube a(1, 2, 2), b(1, 2, 2);
  a.pixels() << 1, 2, 3, 3;
  b.pixels() << 0, 0, 3, 3;
  const auto r = compute_rem(a, b);
  CHECK(r(0, 0) == 5.0);
  CHECK(r(0, 1) == 0.0);
  CHECK((compute_rem(b, a) == r).all());
  CHECK(compute_rem(a, a).isZero());
  CHECK_THROWS_AS(compute_rem(a, HsiCube(2, 1, 2)), ShapeError);
}

TEST_CASE("closing fills a single-pixel hole in a plateau") {
  Raster<double> r = Raster<double>::Ones(5, 5);
  r(2, 2) = 0.0;
  CHECK((morphological_close(r) == Raster<double>::Ones(5, 5)).all());
}

TEST_CASE("closing leaves constants unchanged and rejects even sizes") {
  const Raster<double> c = Raster<double>::Constant(4, 6, 0.3);
  CHECK((morphological_close(c, 5) == c).all());
  CHECK_THROWS_AS(morphological_close(c, 2), InvalidArgument);
  CHECK_THROWS_AS(morphological_close(c, 0), InvalidArgument);
  CHECK((morphological_close(c, 1) == c).all());
}

TEST_CASE("closing matches the brute-force window oracle; extensive, increasing, idempotent") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Raster<double> r = random_raster(16, 16, seed);
    for (Index size : {3, 5}) {
      const auto closed = morphological_close(r, size);
      CHECK((closed == brute(brute(r, size, true), size, false)).all());
      CHECK((closed >= r).all());
      CHECK((morphological_close(closed, size) == closed).all());
      const Raster<double> larger = r + random_raster(16, 16, seed + 100) * 0.1;
      CHECK((morphological_close(larger, size) >= closed).all());
    }
  }
}

TEST_CASE("weights from REM: inverse, normalized, floored") {
  Raster<double> r(1, 3);
  r << 1, 2, 2;
  const auto w = weights_from_rem(r);
  CHECK(w.weights(0, 0) == doctest::Approx(0.5));
  CHECK(w.weights(0, 1) == doctest::Approx(0.25));
  CHECK(w.floor == doctest::Approx(2e-12));

  const auto u = weights_from_rem(Raster<double>::Constant(4, 5, 3.0));
  CHECK((u.weights - 1.0 / 20).abs().maxCoeff() < 1e-15);

  Raster<double> z(1, 3);
  z << 0, 1, 1;
  const auto wz = weights_from_rem(z);
  CHECK(std::isfinite(wz.weights(0, 0)));
  CHECK(wz.weights(0, 0) > 0.999);
  CHECK(wz.weights(0, 1) > 0.0);

  CHECK(weights_from_rem(Raster<double>::Zero(2, 2)).weights.isApproxToConstant(0.25));
  CHECK_THROWS_AS(weights_from_rem(Raster<double>::Constant(1, 2, -1.0)), InvalidArgument);
}

TEST_CASE("weights sum to one and order opposite to the REM") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Raster<double> r = random_raster(8, 9, seed) * std::pow(10.0, double(seed % 5) - 2);
    const auto w = weights_from_rem(r);
    CHECK(std::abs(w.weights.sum() - 1.0) < 1e-9);
    CHECK((w.weights > 0.0).all());
    bool ordered = true;
    for (Index i = 0; i < r.size(); ++i)
      for (Index j = 0; j < r.size(); ++j)
        if (r.data()[i] < r.data()[j] && !(w.weights.data()[i] > w.weights.data()[j])) ordered = false;
    CHECK(ordered);
  }
}
