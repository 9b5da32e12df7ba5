#include "doctest.h"

#include <sstream>

#include "gradcheck.hpp"
#include "hsiad/nn/adam.hpp"
#include "hsiad/nn/serialize.hpp"

using namespace hsiad;
using namespace hsiad::nn;

namespace {

constexpr double kGradTol = 1e-4;

Matrix<double> away_from_zero(Matrix<double> x) {
  for (Index k = 0; k < x.size(); ++k)
    if (std::abs(x.data()[k]) < 0.05) x.data()[k] += x.data()[k] < 0 ? -0.1 : 0.1;
  return x;
}

gradcheck::Report check_single(const Shape& in, std::vector<LayerSpec> specs, Index batch, std::uint64_t seed,
                               bool keep_from_zero = false) {
  Network<double> net(in, std::move(specs), seed);
  std::mt19937_64 rng(seed + 1);
  // Perturb every parameter away from its init so BN scale/shift and biases matter.
  for (auto* p : net.parameters()) p->value += gradcheck::random_matrix(p->value.rows(), p->value.cols(), rng, 0.3);
  Matrix<double> x = gradcheck::random_matrix(in.size(), batch, rng);
  if (keep_from_zero) x = away_from_zero(x);
  const Matrix<double> proj = gradcheck::random_matrix(net.output_shape().size(), batch, rng);
  return gradcheck::check_projection(net, x, proj);
}

}  // namespace

TEST_CASE("conv output size follows the floor formula") {
  Network<float> net({1, 16, 16}, {LayerSpec::conv(3, 3, 1, 4, 2, 2, 1, 1)}, 1);
  CHECK(net.output_shape() == Shape{4, 8, 8});
}

TEST_CASE("sigmoid outputs lie strictly inside (0, 1)") {
  Network<double> net({1, 1, 5}, {LayerSpec::simple(LayerKind::Sigmoid)}, 1);
  Matrix<double> x(5, 1);
  x << -30, -1, 0, 1, 30;
  const auto y = net.forward(Batch<double>({1, 1, 5}, x), Mode::Infer);
  CHECK((y.data.array() > 0.0).all());
  CHECK((y.data.array() < 1.0).all());
}

TEST_CASE("global average pooling of ones gives ones") {
  Network<double> net({256, 2, 2}, {LayerSpec::simple(LayerKind::GlobalAvgPool)}, 1);
  const auto y = net.forward(Batch<double>({256, 2, 2}, Matrix<double>::Ones(1024, 1)), Mode::Infer);
  CHECK(y.shape == Shape{256, 1, 1});
  CHECK(y.data.isApprox(Matrix<double>::Ones(256, 1)));
}

TEST_CASE("linear bias gradient under sum loss is all ones") {
  Network<double> net({1, 1, 4}, {LayerSpec::linear(4, 3)}, 2);
  const Matrix<double> x = Matrix<double>::Random(4, 1);
  const auto y = net.forward(Batch<double>({1, 1, 4}, x), Mode::Train);
  net.zero_grad();
  net.backward(Batch<double>(y.shape, Matrix<double>::Ones(3, 1)));
  CHECK(net.parameters()[1]->grad.isApprox(Matrix<double>::Ones(3, 1)));
}

TEST_CASE("leaky relu passes slope times upstream for negative input") {
  Network<double> net({1, 1, 1}, {LayerSpec::simple(LayerKind::LeakyRelu, 0.2)}, 1);
  net.forward(Batch<double>({1, 1, 1}, Matrix<double>::Constant(1, 1, -1.0)), Mode::Train);
  const auto g = net.backward(Batch<double>({1, 1, 1}, Matrix<double>::Ones(1, 1)));
  CHECK(g.data(0, 0) == doctest::Approx(0.2));
}

TEST_CASE("backward without forward is rejected") {
  Network<double> net({1, 1, 4}, {LayerSpec::linear(4, 1)}, 1);
  CHECK_THROWS_AS(net.backward(Batch<double>({1, 1, 1}, 1)), Error);
}

TEST_CASE("shape mismatch names the failing layer") {
  try {
    Network<double> net({1, 8, 8}, {LayerSpec::conv(3, 3, 1, 4, 2, 2, 1, 1), LayerSpec::conv(3, 3, 5, 4, 2, 2, 1, 1)}, 1);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("layer 1") != std::string::npos);
  }
  Network<double> net({1, 8, 8}, {LayerSpec::conv(3, 3, 1, 4, 2, 2, 1, 1)}, 1);
  CHECK_THROWS_AS(net.forward(Batch<double>({1, 4, 4}, 1), Mode::Train), ShapeError);
}

TEST_CASE("layer specs reject stray or missing fields") {
  auto bad = LayerSpec::simple(LayerKind::Tanh);
  bad.kernel_w = 3;
  CHECK_THROWS_AS(Network<double>({1, 4, 4}, {bad}, 1), InvalidArgument);
  auto zero_stride = LayerSpec::conv(3, 3, 1, 2, 0, 1, 1, 1);
  CHECK_THROWS_AS(Network<double>({1, 4, 4}, {zero_stride}, 1), InvalidArgument);
}

TEST_CASE("gradient check per layer kind") {
  SUBCASE("conv") {
    auto r = check_single({2, 7, 6}, {LayerSpec::conv(3, 3, 2, 3, 2, 2, 1, 1)}, 2, 11);
    CHECK(r.worst() < kGradTol);
  }
  SUBCASE("conv, rectangular kernel and unit height") {
    auto r = check_single({1, 1, 12}, {LayerSpec::conv(5, 1, 1, 3, 2, 1, 2, 0)}, 3, 12);
    CHECK(r.worst() < kGradTol);
  }
  SUBCASE("deconv") {
    auto r = check_single({3, 4, 3}, {LayerSpec::deconv(3, 3, 3, 2, 2, 2, 1, 1, 8, 6)}, 2, 13);
    CHECK(r.worst() < kGradTol);
  }
  SUBCASE("batchnorm, train mode") {
    auto r = check_single({3, 2, 2}, {LayerSpec::simple(LayerKind::BatchNorm)}, 4, 14);
    CHECK(r.worst() < kGradTol);
  }
  SUBCASE("lrelu") {
    auto r = check_single({2, 3, 3}, {LayerSpec::simple(LayerKind::LeakyRelu, 0.2)}, 2, 15, true);
    CHECK(r.worst() < kGradTol);
  }
  SUBCASE("tanh") {
    auto r = check_single({2, 3, 3}, {LayerSpec::simple(LayerKind::Tanh)}, 2, 16);
    CHECK(r.worst() < kGradTol);
  }
  SUBCASE("sigmoid") {
    auto r = check_single({2, 3, 3}, {LayerSpec::simple(LayerKind::Sigmoid)}, 2, 17);
    CHECK(r.worst() < kGradTol);
  }
  SUBCASE("gap") {
    auto r = check_single({4, 3, 2}, {LayerSpec::simple(LayerKind::GlobalAvgPool)}, 2, 18);
    CHECK(r.worst() < kGradTol);
  }
  SUBCASE("linear") {
    auto r = check_single({2, 2, 2}, {LayerSpec::linear(8, 3)}, 3, 19);
    CHECK(r.worst() < kGradTol);
  }
  SUBCASE("stack") {
    auto r = check_single({2, 8, 8},
                          {LayerSpec::conv(3, 3, 2, 4, 2, 2, 1, 1), LayerSpec::simple(LayerKind::BatchNorm),
                           LayerSpec::simple(LayerKind::LeakyRelu), LayerSpec::conv(3, 3, 4, 4, 2, 2, 1, 1),
                           LayerSpec::simple(LayerKind::GlobalAvgPool), LayerSpec::linear(4, 1),
                           LayerSpec::simple(LayerKind::Sigmoid)},
                          3, 20);
    CHECK(r.worst() < kGradTol);
  }
}

TEST_CASE("batchnorm infer mode uses running statistics only") {
  Network<double> net({2, 3, 3}, {LayerSpec::simple(LayerKind::BatchNorm)}, 1);
  std::mt19937_64 rng(3);
  const Matrix<double> x = gradcheck::random_matrix(18, 4, rng);
  const auto a = net.forward(Batch<double>({2, 3, 3}, x), Mode::Infer);
  const auto b = net.forward(Batch<double>({2, 3, 3}, x.leftCols(1)), Mode::Infer);
  CHECK(a.data.col(0).isApprox(b.data.col(0)));
  // Running stats start at mean 0 / var 1, so inference is nearly the identity.
  CHECK(a.data.isApprox(x / std::sqrt(1.0 + 1e-5)));
}

TEST_CASE("conv and deconv with a shared kernel are adjoint") {
  const auto conv_spec = LayerSpec::conv(3, 3, 2, 3, 2, 2, 1, 1);
  const auto deconv_spec = LayerSpec::deconv(3, 3, 3, 2, 2, 2, 1, 1, 7, 6);
  Network<double> conv({2, 7, 6}, {conv_spec}, 5);
  Network<double> deconv({3, 4, 3}, {deconv_spec}, 6);
  deconv.parameters()[0]->value = conv.parameters()[0]->value;
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix<double> x = gradcheck::random_matrix(conv.input_shape().size(), 1, rng);
    const Matrix<double> y = gradcheck::random_matrix(deconv.input_shape().size(), 1, rng);
    const double lhs = conv.forward(Batch<double>(conv.input_shape(), x), Mode::Infer).data.cwiseProduct(y).sum();
    const double rhs = deconv.forward(Batch<double>(deconv.input_shape(), y), Mode::Infer).data.cwiseProduct(x).sum();
    CHECK(std::abs(lhs - rhs) <= 1e-8 * std::max(1.0, std::abs(lhs)));
  }
}

TEST_CASE("batchnorm train output has per-channel mean shift and variance scale^2") {
  Network<double> net({2, 4, 4}, {LayerSpec::simple(LayerKind::BatchNorm)}, 1);
  auto params = net.parameters();
  params[0]->value << 1.5, 0.5;
  params[1]->value << -0.25, 2.0;
  std::mt19937_64 rng(9);
  const Matrix<double> x = gradcheck::random_matrix(32, 6, rng, 10.0);
  const auto y = net.forward(Batch<double>({2, 4, 4}, x), Mode::Train);
  for (Index c = 0; c < 2; ++c) {
    Eigen::ArrayXd v(16 * 6);
    for (Index b = 0; b < 6; ++b) v.segment(b * 16, 16) = y.data.col(b).segment(c * 16, 16).array();
    const double mean = v.mean();
    const double var = (v - mean).square().mean();
    CHECK(mean == doctest::Approx(params[1]->value(c, 0)).epsilon(1e-5));
    CHECK(std::abs(var - params[0]->value(c, 0) * params[0]->value(c, 0)) < 1e-5);
  }
}

TEST_CASE("forward output depends only on parameters, statistics, input and mode") {
  Network<double> net({1, 8, 8}, {LayerSpec::conv(3, 3, 1, 2, 2, 2, 1, 1), LayerSpec::simple(LayerKind::BatchNorm)}, 4);
  std::mt19937_64 rng(1);
  const Matrix<double> x = gradcheck::random_matrix(64, 3, rng);
  const auto a = net.forward(Batch<double>({1, 8, 8}, x), Mode::Train);
  const auto b = net.forward(Batch<double>({1, 8, 8}, x), Mode::Train);
  CHECK(a.data == b.data);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  Parameter<double> p(Matrix<double>::Constant(3, 2, 0.7));
  Adam<double> opt;
  opt.step({&p});
  CHECK((p.value.array() - 0.7).abs().maxCoeff() < 1e-12);
}

TEST_CASE("adam: first step with unit gradient moves by the learning rate") {
  Parameter<double> p(Matrix<double>::Constant(1, 1, 1.0));
  p.grad.setOnes();
  Adam<double> opt({0.1, 0.5, 0.999, 1e-8});
  opt.step({&p});
  CHECK(p.value(0, 0) == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(opt.step_count() == 1);
}

TEST_CASE("adam: identical runs give bit-identical trajectories") {
  auto run = [] {
    Network<float> net({1, 1, 6}, {LayerSpec::linear(6, 2), LayerSpec::simple(LayerKind::Tanh)}, 42);
    Adam<float> opt;
    Matrix<float> x = Vector<float>::LinSpaced(6, -1, 1);
    for (int i = 0; i < 20; ++i) {
      net.zero_grad();
      auto y = net.forward(Batch<float>({1, 1, 6}, x), Mode::Train);
      net.backward(Batch<float>(y.shape, y.data));
      opt.step(net.parameters());
    }
    return net.parameters()[0]->value;
  };
  CHECK(run() == run());
}

TEST_CASE("adam rejects a changed parameter layout") {
  Parameter<double> a(Matrix<double>::Zero(2, 2));
  Parameter<double> b(Matrix<double>::Zero(3, 1));
  Adam<double> opt;
  opt.step({&a});
  CHECK_THROWS_AS(opt.step({&b}), ShapeError);
}

TEST_CASE("network serialization preserves outputs") {
  Network<float> net({1, 8, 8},
                     {LayerSpec::conv(3, 3, 1, 4, 2, 2, 1, 1), LayerSpec::simple(LayerKind::BatchNorm),
                      LayerSpec::simple(LayerKind::LeakyRelu), LayerSpec::deconv(3, 3, 4, 1, 2, 2, 1, 1, 8, 8),
                      LayerSpec::simple(LayerKind::Tanh)},
                     3);
  const Matrix<float> x = Matrix<float>::Random(64, 5);
  net.forward(Batch<float>({1, 8, 8}, x), Mode::Train);  // moves running stats
  std::stringstream buf;
  write_network(buf, net);
  auto back = read_network<float>(buf);
  CHECK(back.specs() == net.specs());
  const auto a = net.forward(Batch<float>({1, 8, 8}, x), Mode::Infer);
  const auto b = back.forward(Batch<float>({1, 8, 8}, x), Mode::Infer);
  CHECK(a.data == b.data);
}
