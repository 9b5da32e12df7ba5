// Finite-difference checks of the two adversarial objectives. Test-only.
#ifndef HSIAD_TESTS_AEAN_GRADCHECK_HPP
#define HSIAD_TESTS_AEAN_GRADCHECK_HPP

#include "gradcheck.hpp"
#include "hsiad/aean.hpp"

namespace gradcheck {

// A perturbation of an early weight moves thousands of downstream LReLU inputs,
// so a probe can straddle a kink. Entries that miss at the first step are
// re-probed at the second; zero-gradient biases need the larger step to stay
// above rounding noise.
constexpr double kCompositeStep = 1e-5;
constexpr double kCompositeFallback = 1e-6;

inline double objective_value(hsiad::AeanModel<double>& model, const Matrix<double>& batch) {
  const auto shape = model.sample_shape();
  const auto recon = model.autoencoder.forward(Batch<double>(shape, batch), Mode::Train);
  const auto p = model.discriminator.forward(recon, Mode::Train);
  double adv = 0.0;
  for (Index i = 0; i < p.data.size(); ++i) adv += std::log(1.0 - hsiad::clamp_probability(p.data(i)));
  return adv / double(batch.cols()) + model.lambda * (batch - recon.data).cwiseAbs().mean();
}

inline double negated_adversarial(hsiad::AeanModel<double>& model, const Matrix<double>& batch) {
  const auto shape = model.sample_shape();
  const auto fake = model.autoencoder.forward(Batch<double>(shape, batch), Mode::Train);
  const auto real_p = model.discriminator.forward(Batch<double>(shape, batch), Mode::Train);
  const auto fake_p = model.discriminator.forward(fake, Mode::Train);
  return -hsiad::adversarial_loss(real_p.data, fake_p.data);
}

/// Autoencoder gradient of E[log(1 - D(A(s)))] + lambda * L_R.
inline Report check_autoencoder_objective(hsiad::AeanModel<double>& model, Matrix<double> batch, Index per_tensor,
                                          std::uint64_t seed) {
  auto loss = [&](Network<double>&, const Matrix<double>& x) { return objective_value(model, x); };
  auto grads = [&](Network<double>&, const Matrix<double>& x) {
    hsiad::autoencoder_pass(model, x);
    return Matrix<double>();
  };
  return check(model.autoencoder, batch, loss, grads, false, per_tensor, seed, kCompositeStep, kCompositeFallback);
}

/// Discriminator gradient of -L_Adv.
inline Report check_discriminator_objective(hsiad::AeanModel<double>& model, Matrix<double> batch, Index per_tensor,
                                            std::uint64_t seed) {
  auto loss = [&](Network<double>&, const Matrix<double>& x) { return negated_adversarial(model, x); };
  auto grads = [&](Network<double>&, const Matrix<double>& x) {
    hsiad::discriminator_pass(model, x);
    return Matrix<double>();
  };
  return check(model.discriminator, batch, loss, grads, false, per_tensor, seed, kCompositeStep, kCompositeFallback);
}

}  // namespace gradcheck

#endif  // HSIAD_TESTS_AEAN_GRADCHECK_HPP
