#ifndef HSIAD_AEAN_HPP
#define HSIAD_AEAN_HPP

#include <algorithm>
#include <array>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <vector>

#include "hsiad/core.hpp"
#include "hsiad/nn/adam.hpp"
#include "hsiad/nn/network.hpp"
#include "hsiad/nn/serialize.hpp"
#include "hsiad/purify.hpp"

namespace hsiad {

/// Autoencoding adversarial network for spectral (d=1), single-band spatial
/// (d=2) or spectral-spatial (d=3) samples.
///
/// Encoder: conv 9, 5, 3 with 64/128/256 channels, each stride 2 with
/// same-style padding, BN and LReLU. Decoder mirrors it with transposed convs
/// cropped back to the recorded encoder sizes and ends in tanh without BN.
/// Discriminator repeats the encoder, then global average pooling and a
/// 256 -> 1 linear head with sigmoid.
template <typename Scalar>
struct AeanModel {
  int dim = 1;
  Index bands = 0;
  Index block = 0;
  double lambda = 10.0;
  bool trained = false;
  nn::Network<Scalar> autoencoder;
  nn::Network<Scalar> discriminator;

  nn::Shape sample_shape() const { return autoencoder.input_shape(); }

  template <typename Other>
  AeanModel<Other> cast() const {
    return {dim, bands, block, lambda, trained, autoencoder.template cast<Other>(), discriminator.template cast<Other>()};
  }
};

inline constexpr std::array<Index, 3> kAeanKernels = {9, 5, 3};
inline constexpr std::array<Index, 3> kAeanChannels = {64, 128, 256};
inline constexpr double kAeanSlope = 0.2;

inline nn::Shape aean_sample_shape(int dim, Index bands, Index block) {
  switch (dim) {
    case 1: return {1, 1, bands};
    case 2: return {1, block, block};
    case 3: return {bands, block, block};
  }
  throw InvalidArgument("AEAN dimension must be 1, 2 or 3");
}

namespace detail {

inline nn::LayerSpec aean_conv(int dim, Index k, Index in, Index out) {
  const Index kh = dim == 1 ? 1 : k;
  return nn::LayerSpec::conv(k, kh, in, out, 2, dim == 1 ? 1 : 2, (k - 1) / 2, dim == 1 ? 0 : (kh - 1) / 2);
}

inline Index halved(Index n) { return (n - 1) / 2 + 1; }

}  // namespace detail

/// `seed` drives the weight initialization of both sub-networks.
template <typename Scalar>
AeanModel<Scalar> build_aean(int dim, Index bands, Index block, std::uint64_t seed, double lambda = 10.0) {
  using nn::LayerKind;
  using nn::LayerSpec;
  if (dim < 1 || dim > 3) throw InvalidArgument("AEAN dimension must be 1, 2 or 3");
  if (bands < 1) throw InvalidArgument("band count must be positive");
  if (dim != 1 && block < 8)
    throw InvalidArgument("block size " + std::to_string(block) + " too small for three stride-2 stages (need >= 8)");
  if (!(lambda > 0)) throw InvalidArgument("lambda must be positive");

  const nn::Shape input = aean_sample_shape(dim, bands, block);
  // Spatial sizes seen by each encoder stage, recorded for decoder cropping.
  std::array<nn::Shape, 4> sizes{input};
  for (int s = 0; s < 3; ++s)
    sizes[s + 1] = {kAeanChannels[s], dim == 1 ? 1 : detail::halved(sizes[s].height), detail::halved(sizes[s].width)};

  std::vector<LayerSpec> encoder;
  Index in_ch = input.channels;
  for (int s = 0; s < 3; ++s) {
    encoder.push_back(detail::aean_conv(dim, kAeanKernels[s], in_ch, kAeanChannels[s]));
    encoder.push_back(LayerSpec::simple(LayerKind::BatchNorm));
    encoder.push_back(LayerSpec::simple(LayerKind::LeakyRelu, kAeanSlope));
    in_ch = kAeanChannels[s];
  }

  std::vector<LayerSpec> ae = encoder;
  for (int s = 2; s >= 0; --s) {
    const Index k = kAeanKernels[s];
    const Index kh = dim == 1 ? 1 : k;
    const Index out_ch = s == 0 ? input.channels : kAeanChannels[s - 1];
    ae.push_back(LayerSpec::deconv(k, kh, kAeanChannels[s], out_ch, 2, dim == 1 ? 1 : 2, (k - 1) / 2,
                                   dim == 1 ? 0 : (kh - 1) / 2, sizes[s].height, sizes[s].width));
    if (s > 0) {
      ae.push_back(LayerSpec::simple(LayerKind::BatchNorm));
      ae.push_back(LayerSpec::simple(LayerKind::LeakyRelu, kAeanSlope));
    } else {
      ae.push_back(LayerSpec::simple(LayerKind::Tanh));
    }
  }

  std::vector<LayerSpec> disc = encoder;
  disc.push_back(LayerSpec::simple(LayerKind::GlobalAvgPool));
  disc.push_back(LayerSpec::linear(kAeanChannels[2], 1));
  disc.push_back(LayerSpec::simple(LayerKind::Sigmoid));

  std::seed_seq seq{seed, std::uint64_t{0xAEA1}};
  std::array<std::uint64_t, 2> seeds{};
  seq.generate(seeds.begin(), seeds.end());
  AeanModel<Scalar> model{dim, bands, dim == 1 ? 0 : block, lambda, false,
                          nn::Network<Scalar>(input, std::move(ae), seeds[0]),
                          nn::Network<Scalar>(input, std::move(disc), seeds[1])};
  if (!(model.autoencoder.output_shape() == input))
    throw ShapeError("autoencoder output " + model.autoencoder.output_shape().str() + " differs from input " + input.str());
  return model;
}

inline constexpr double kProbClamp = 1e-7;

template <typename Scalar>
Scalar clamp_probability(Scalar p) {
  return std::clamp(p, Scalar(kProbClamp), Scalar(1.0 - kProbClamp));
}

/// E[log D(s)] + E[log(1 - D(A(s)))] over the batch, probabilities clamped.
template <typename Derived1, typename Derived2>
double adversarial_loss(const Eigen::DenseBase<Derived1>& real, const Eigen::DenseBase<Derived2>& fake) {
  const Eigen::ArrayXd r = real.derived().template cast<double>().reshaped();
  const Eigen::ArrayXd f = fake.derived().template cast<double>().reshaped();
  const double a = r.unaryExpr([](double p) { return std::log(clamp_probability(p)); }).mean();
  const double b = f.unaryExpr([](double p) { return std::log(1.0 - clamp_probability(p)); }).mean();
  return a + b;
}

/// Mean absolute deviation over every element of every sample.
template <typename Derived1, typename Derived2>
double reconstruction_loss(const Eigen::MatrixBase<Derived1>& s, const Eigen::MatrixBase<Derived2>& recon) {
  if (s.rows() != recon.rows() || s.cols() != recon.cols()) throw ShapeError("reconstruction shape mismatch");
  return (s.template cast<double>() - recon.template cast<double>()).cwiseAbs().mean();
}

namespace detail {

// d/dp of log(clamp(p)) / n; zero where the clamp is active.
template <typename Scalar>
Matrix<Scalar> log_grad(const Matrix<Scalar>& p, double n) {
  return p.unaryExpr([n](Scalar v) {
    return (v < Scalar(kProbClamp) || v > Scalar(1.0 - kProbClamp)) ? Scalar(0) : Scalar(1.0 / (n * double(v)));
  });
}

// d/dp of log(1 - clamp(p)) / n.
template <typename Scalar>
Matrix<Scalar> log1m_grad(const Matrix<Scalar>& p, double n) {
  return p.unaryExpr([n](Scalar v) {
    return (v < Scalar(kProbClamp) || v > Scalar(1.0 - kProbClamp)) ? Scalar(0) : Scalar(-1.0 / (n * (1.0 - double(v))));
  });
}

}  // namespace detail

/// One forward/backward pass of the discriminator objective -L_Adv on a
/// batch; accumulates discriminator gradients and returns L_Adv.
template <typename Scalar>
double discriminator_pass(AeanModel<Scalar>& model, const Matrix<Scalar>& batch) {
  const nn::Shape shape = model.sample_shape();
  const auto fake = model.autoencoder.forward(nn::Batch<Scalar>(shape, batch), nn::Mode::Train);
  const auto real_p = model.discriminator.forward(nn::Batch<Scalar>(shape, batch), nn::Mode::Train);
  const double n = double(batch.cols());
  model.discriminator.backward(nn::Batch<Scalar>(real_p.shape, (-detail::log_grad(real_p.data, n)).eval()));
  const auto fake_p = model.discriminator.forward(fake, nn::Mode::Train);
  model.discriminator.backward(nn::Batch<Scalar>(fake_p.shape, (-detail::log1m_grad(fake_p.data, n)).eval()));
  return adversarial_loss(real_p.data, fake_p.data);
}

struct AutoencoderObjective {
  double adversarial_term = 0.0;  // E[log(1 - D(A(s)))]
  double reconstruction = 0.0;    // L_R
  double value(double lambda) const { return adversarial_term + lambda * reconstruction; }
};

/// Forward/backward of the part of L_Adv + lambda * L_R that depends on the
/// autoencoder; accumulates autoencoder gradients.
template <typename Scalar>
AutoencoderObjective autoencoder_pass(AeanModel<Scalar>& model, const Matrix<Scalar>& batch) {
  const nn::Shape shape = model.sample_shape();
  const auto recon = model.autoencoder.forward(nn::Batch<Scalar>(shape, batch), nn::Mode::Train);
  const auto p = model.discriminator.forward(recon, nn::Mode::Train);
  const double n = double(batch.cols());
  AutoencoderObjective obj;
  for (Index i = 0; i < p.data.size(); ++i) obj.adversarial_term += std::log(1.0 - clamp_probability(double(p.data(i)))) / n;
  obj.reconstruction = reconstruction_loss(batch, recon.data);

  auto grad = model.discriminator.backward(nn::Batch<Scalar>(p.shape, detail::log1m_grad(p.data, n)));
  const Scalar l1_scale = Scalar(model.lambda / double(recon.data.size()));
  // Subgradient of |x| at 0 is 0.
  grad.data += (recon.data - batch).unaryExpr([l1_scale](Scalar v) {
    return v > Scalar(0) ? l1_scale : (v < Scalar(0) ? -l1_scale : Scalar(0));
  });
  model.autoencoder.backward(grad);
  return obj;
}

struct TrainConfig {
  int epochs = 300;
  Index batch_size = 64;
  std::uint64_t seed = 0;
  double lambda = 10.0;
  double lr_autoencoder = 2e-4;
  double lr_discriminator = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  long log_interval = 1;

  /// 300 epochs / batch 64 for d=1, 500 / 16 otherwise.
  static TrainConfig defaults_for(int dim) {
    TrainConfig c;
    if (dim != 1) {
      c.epochs = 500;
      c.batch_size = 16;
    }
    return c;
  }
};

struct LossRecord {
  long step = 0;
  double adversarial = 0.0;
  double reconstruction = 0.0;
  double total = 0.0;
};

/// Alternating minimax optimization: per batch one discriminator ascent step
/// on L_Adv, then one autoencoder descent step on L_Adv + lambda * L_R. Each
/// trace record averages the steps since the previous record.
template <typename Scalar>
std::vector<LossRecord> train_aean(AeanModel<Scalar>& model, const TrainingSet& set, const TrainConfig& cfg) {
  if (cfg.epochs < 1 || cfg.batch_size < 1 || !(cfg.lambda > 0) || cfg.log_interval < 1)
    throw InvalidArgument("training config requires epochs >= 1, batch >= 1, lambda > 0, log interval >= 1");
  if (set.count() == 0) throw EmptyTrainingSetError(set.dim);
  if (set.dim != model.dim) throw InvalidArgument("training set dimension differs from model");
  if (set.samples.rows() != model.sample_shape().size())
    throw ShapeError("training samples have " + std::to_string(set.samples.rows()) + " entries, model expects " +
                     model.sample_shape().str());
  model.lambda = cfg.lambda;

  std::mt19937_64 rng(cfg.seed);
  nn::Adam<Scalar> opt_a({cfg.lr_autoencoder, cfg.beta1, cfg.beta2, 1e-8});
  nn::Adam<Scalar> opt_d({cfg.lr_discriminator, cfg.beta1, cfg.beta2, 1e-8});
  const Matrix<Scalar> samples = set.samples.template cast<Scalar>();
  std::vector<Index> order(static_cast<std::size_t>(set.count()));
  std::iota(order.begin(), order.end(), Index{0});

  std::vector<LossRecord> trace;
  LossRecord acc;
  long pending = 0, step = 0;
  Matrix<Scalar> batch;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch.resize(samples.rows(), static_cast<Index>(stop - start));
      for (std::size_t k = start; k < stop; ++k) batch.col(static_cast<Index>(k - start)) = samples.col(order[k]);

      double adv = 0.0;
      AutoencoderObjective obj;
      try {
        model.discriminator.zero_grad();
        adv = discriminator_pass(model, batch);
        opt_d.step(model.discriminator.parameters());

        model.autoencoder.zero_grad();
        model.discriminator.zero_grad();
        obj = autoencoder_pass(model, batch);
        opt_a.step(model.autoencoder.parameters());
      } catch (const NonFiniteError& e) {
        throw NonFiniteError("training diverged at step " + std::to_string(step) + ": " + e.what());
      }
      if (!std::isfinite(adv) || !std::isfinite(obj.reconstruction))
        throw NonFiniteError("non-finite loss at step " + std::to_string(step));

      ++step;
      ++pending;
      acc.adversarial += adv;
      acc.reconstruction += obj.reconstruction;
      if (pending == cfg.log_interval) {
        acc.step = step;
        acc.adversarial /= double(pending);
        acc.reconstruction /= double(pending);
        acc.total = acc.adversarial + cfg.lambda * acc.reconstruction;
        trace.push_back(acc);
        acc = {};
        pending = 0;
      }
    }
  }
  if (pending > 0) {
    acc.step = step;
    acc.adversarial /= double(pending);
    acc.reconstruction /= double(pending);
    acc.total = acc.adversarial + cfg.lambda * acc.reconstruction;
    trace.push_back(acc);
  }
  model.trained = true;
  return trace;
}

/// Autoencoder output in inference mode, in chunks to bound memory.
template <typename Scalar>
Matrix<Scalar> reconstruct_samples(AeanModel<Scalar>& model, const Matrix<Scalar>& samples, Index chunk = 256) {
  Matrix<Scalar> out(samples.rows(), samples.cols());
  for (Index start = 0; start < samples.cols(); start += chunk) {
    const Index n = std::min(chunk, samples.cols() - start);
    out.middleCols(start, n) =
        model.autoencoder.forward(nn::Batch<Scalar>(model.sample_shape(), samples.middleCols(start, n)), nn::Mode::Infer).data;
  }
  return out;
}

/// Mirror index without edge repetition (-1 -> 1, n -> n-2).
inline Index reflect_index(Index i, Index n) {
  if (n == 1) return 0;
  const Index period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

/// Synthesized cube: spectra reconstructed one by one (d=1), or the image
/// reflect-padded to a multiple of the block size, cut into disjoint m x m
/// tiles per band (d=2) or m x m x L cubes (d=3), reconstructed, placed
/// back and cropped.
template <typename Scalar>
HsiCube synthesize_hsi(AeanModel<Scalar>& model, const HsiCube& cube) {
  if (!model.trained) throw InvalidArgument("synthesis requires a trained model");
  if (model.dim != 2 && model.bands != cube.bands())
    throw ShapeError("model expects " + std::to_string(model.bands) + " bands, cube has " + std::to_string(cube.bands()));

  if (model.dim == 1) {
    const Matrix<Scalar> spectra = cube.pixels().transpose().template cast<Scalar>();
    const Matrix<Scalar> recon = reconstruct_samples(model, spectra);
    return HsiCube(cube.height(), cube.width(), recon.transpose().template cast<double>().eval());
  }

  const Index m = model.block;
  const Index ph = (cube.height() + m - 1) / m * m;
  const Index pw = (cube.width() + m - 1) / m * m;
  const Index ty = ph / m, tx = pw / m, tiles = ty * tx, bands = cube.bands();
  const Index channels = model.dim == 3 ? bands : 1;
  const Index per_tile = model.dim == 3 ? 1 : bands;
  Matrix<Scalar> samples(channels * m * m, tiles * per_tile);
  for (Index t = 0; t < tiles; ++t) {
    const Index r0 = (t / tx) * m, c0 = (t % tx) * m;
    for (Index b = 0; b < bands; ++b) {
      const auto plane = cube.band(b);
      const Index col = model.dim == 3 ? t : t * bands + b;
      const Index offset = model.dim == 3 ? b * m * m : 0;
      for (Index r = 0; r < m; ++r)
        for (Index c = 0; c < m; ++c)
          samples(offset + r * m + c, col) =
              static_cast<Scalar>(plane(reflect_index(r0 + r, cube.height()), reflect_index(c0 + c, cube.width())));
    }
  }
  const Matrix<Scalar> recon = reconstruct_samples(model, samples);
  HsiCube out(cube.height(), cube.width(), bands);
  for (Index t = 0; t < tiles; ++t) {
    const Index r0 = (t / tx) * m, c0 = (t % tx) * m;
    for (Index b = 0; b < bands; ++b) {
      auto plane = out.band(b);
      const Index col = model.dim == 3 ? t : t * bands + b;
      const Index offset = model.dim == 3 ? b * m * m : 0;
      for (Index r = 0; r < m && r0 + r < cube.height(); ++r)
        for (Index c = 0; c < m && c0 + c < cube.width(); ++c)
          plane(r0 + r, c0 + c) = static_cast<double>(recon(offset + r * m + c, col));
    }
  }
  return out;
}

inline constexpr std::uint8_t kCheckpointVersion = 1;

/// "AEAN", version, d, u32 L, u32 m, f64 lambda, u8 trained, autoencoder,
/// discriminator.
template <typename Scalar>
void save_checkpoint(AeanModel<Scalar>& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write("AEAN", 4);
  nn::io_detail::put<std::uint8_t>(out, kCheckpointVersion);
  nn::io_detail::put<std::uint8_t>(out, static_cast<std::uint8_t>(model.dim));
  nn::io_detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(model.bands));
  nn::io_detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(model.block));
  nn::io_detail::put<double>(out, model.lambda);
  nn::io_detail::put<std::uint8_t>(out, model.trained ? 1 : 0);
  nn::write_network(out, model.autoencoder);
  nn::write_network(out, model.discriminator);
  if (!out) throw FormatError("failed writing " + path.string());
}

template <typename Scalar>
AeanModel<Scalar> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "AEAN", 4) != 0) throw FormatError(path.string() + ": not an AEAN checkpoint");
  const auto version = nn::io_detail::get<std::uint8_t>(in);
  if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  AeanModel<Scalar> model;
  model.dim = nn::io_detail::get<std::uint8_t>(in);
  model.bands = nn::io_detail::get<std::uint32_t>(in);
  model.block = nn::io_detail::get<std::uint32_t>(in);
  model.lambda = nn::io_detail::get<double>(in);
  model.trained = nn::io_detail::get<std::uint8_t>(in) != 0;
  model.autoencoder = nn::read_network<Scalar>(in);
  model.discriminator = nn::read_network<Scalar>(in);
  if (model.dim < 1 || model.dim > 3) throw FormatError("bad model dimension in checkpoint");
  return model;
}

}  // namespace hsiad

#endif  // HSIAD_AEAN_HPP
