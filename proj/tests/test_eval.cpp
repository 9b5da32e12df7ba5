#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <random>

#include "hsiad/eval.hpp"

using namespace hsiad;

namespace {

// (correct pairs + ties / 2) / (P * N), kept as the doubled integer numerator.
long long pair_count(const Raster<double>& s, const Mask& ref) {
  long long twice = 0;
  for (Index i = 0; i < s.size(); ++i)
    if (ref.data()[i])
      for (Index j = 0; j < s.size(); ++j)
        if (!ref.data()[j]) twice += s.data()[i] > s.data()[j] ? 2 : (s.data()[i] == s.data()[j] ? 1 : 0);
  return twice;
}

}  // namespace

TEST_CASE("six-pixel example has AUC 0.875") {
  Raster<double> s(1, 6);
  s << 5, 4, 3, 2, 1, 0;
  Mask ref(1, 6);
  ref << 1, 0, 1, 0, 0, 0;
  const auto roc = roc_curve(s, ref);
  CHECK(roc.auc == 0.875);
  CHECK(roc.points.front().fpr == 0.0);
  CHECK(roc.points.back().fpr == 1.0);
  CHECK(roc.points.back().tpr == 1.0);
}

TEST_CASE("perfect separation and full ties") {
  Raster<double> s(2, 2);
  s << 9, 8, 1, 0;
  Mask ref(2, 2);
  ref << 1, 1, 0, 0;
  CHECK(roc_curve(s, ref).auc == 1.0);
  const auto tied = roc_curve(Raster<double>::Constant(2, 2, 3.0), ref);
  CHECK(tied.auc == 0.5);
  CHECK(tied.points.size() == 2);
}

TEST_CASE("AUC equals pair counting exactly, including ties") {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 30; ++t) {
    const Index n = 2 + Index(rng() % 300);
    Raster<double> s(1, n);
    Mask ref(1, n);
    for (Index i = 0; i < n; ++i) {
      s(0, i) = double(rng() % 7);
      ref(0, i) = std::uint8_t(rng() % 3 == 0);
    }
    ref(0, 0) = 1;
    ref(0, 1) = 0;
    const auto roc = roc_curve(s, ref);
    const double oracle = double(pair_count(s, ref)) / (2.0 * double(roc.positives) * double(roc.negatives));
    CHECK(roc.auc == oracle);
    for (std::size_t k = 1; k < roc.points.size(); ++k) {
      CHECK(roc.points[k].fpr >= roc.points[k - 1].fpr);
      CHECK(roc.points[k].tpr >= roc.points[k - 1].tpr);
    }
  }
}

TEST_CASE("AUC is invariant under a strictly increasing transform") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd(0.0, 1.0);
  Raster<double> s(10, 10);
  Mask ref = Mask::Zero(10, 10);
  for (Index i = 0; i < s.size(); ++i) s.data()[i] = nd(rng);
  for (Index i = 0; i < 10; ++i) ref.data()[i * 7] = 1;
  CHECK(roc_curve(s, ref).auc == roc_curve(s.exp() * 3.0 + 1.0, ref).auc);
}

TEST_CASE("single-class references are rejected") {
  CHECK_THROWS_AS(roc_curve(Raster<double>::Zero(2, 2), Mask::Zero(2, 2)), InvalidArgument);
  CHECK_THROWS_AS(detection_map(Raster<double>::Zero(2, 2), Mask::Ones(2, 2), 0.1), InvalidArgument);
}

TEST_CASE("detection map respects the false-alarm budget") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Raster<double> s(1, 110);
  Mask ref = Mask::Zero(1, 110);
  for (Index i = 0; i < 110; ++i) s(0, i) = u(rng);
  for (Index i = 100; i < 110; ++i) ref(0, i) = 1;
  for (double far : {0.0, 0.01, 0.05, 0.5, 1.0}) {
    const auto m = detection_map(s, ref, far);
    CHECK(m.false_positives <= Index(std::floor(far * 100 + 1e-9)));
  }
  const auto zero = detection_map(s, ref, 0.0);
  CHECK(zero.threshold == s.leftCols(100).maxCoeff());
  CHECK(zero.false_positives == 0);
}

TEST_CASE("perfect separation at FAR 0.01 recovers the reference") {
  Raster<double> s(10, 10);
  Mask ref = Mask::Zero(10, 10);
  for (Index i = 0; i < 100; ++i) s.data()[i] = double(i);
  for (Index i = 95; i < 100; ++i) ref.data()[i] = 1;
  CHECK((detection_map(s, ref, 0.01).map == ref).all());
}

TEST_CASE("ROC CSV and results CSV") {
  const auto dir = std::filesystem::temp_directory_path() / "hsiad_test_eval";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  Raster<double> s(1, 3);
  s << 0.5, 0.2, 0.9;
  Mask ref(1, 3);
  ref << 0, 0, 1;
  const auto roc = roc_curve(s, ref);
  save_roc_csv(roc, dir / "roc.csv");
  std::ifstream f(dir / "roc.csv");
  std::string header, first;
  std::getline(f, header);
  std::getline(f, first);
  CHECK(header == "threshold;fpr;tpr");
  CHECK(first == "inf;0;0");

  append_result(dir / "results.csv", "scene", "rx", 3, roc.auc);
  append_result(dir / "results.csv", "scene", "lrx", 3, 0.5);
  std::ifstream r(dir / "results.csv");
  std::string lines[3];
  for (auto& l : lines) std::getline(r, l);
  CHECK(lines[0] == "image;detector;seed;auc");
  CHECK(lines[1] == "scene;rx;3;1");
  CHECK(lines[2] == "scene;lrx;3;0.5");
}
