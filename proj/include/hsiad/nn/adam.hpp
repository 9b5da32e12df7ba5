#ifndef HSIAD_NN_ADAM_HPP
#define HSIAD_NN_ADAM_HPP

#include <cmath>
#include <vector>

#include "hsiad/nn/layers.hpp"

namespace hsiad::nn {

struct AdamConfig {
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adaptive-moment optimizer. Moment buffers are created on the first step and
/// must keep mirroring the parameter shapes afterwards.
template <typename Scalar>
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(const std::vector<Parameter<Scalar>*>& params) {
    if (first_.empty()) {
      for (const auto* p : params) {
        first_.push_back(Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
        second_.push_back(Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
      }
    }
    if (params.size() != first_.size()) throw ShapeError("optimizer parameter count changed");
    ++steps_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
    const auto b1 = static_cast<Scalar>(cfg_.beta1);
    const auto b2 = static_cast<Scalar>(cfg_.beta2);
    const auto lr = static_cast<Scalar>(cfg_.learning_rate);
    const auto eps = static_cast<Scalar>(cfg_.epsilon);
    const auto inv_c1 = static_cast<Scalar>(1.0 / c1);
    const auto inv_c2 = static_cast<Scalar>(1.0 / c2);
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto& p = *params[k];
      if (p.value.rows() != first_[k].rows() || p.value.cols() != first_[k].cols() || p.grad.rows() != p.value.rows() ||
          p.grad.cols() != p.value.cols())
        throw ShapeError("optimizer state does not match parameter " + std::to_string(k));
      first_[k] = b1 * first_[k] + (Scalar(1) - b1) * p.grad;
      second_[k] = b2 * second_[k] + (Scalar(1) - b2) * p.grad.cwiseAbs2();
      p.value.array() -= lr * (first_[k].array() * inv_c1) / ((second_[k].array() * inv_c2).sqrt() + eps);
    }
  }

  long step_count() const { return steps_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  long steps_ = 0;
  std::vector<Matrix<Scalar>> first_;
  std::vector<Matrix<Scalar>> second_;
};

}  // namespace hsiad::nn

#endif  // HSIAD_NN_ADAM_HPP
