#pragma once

#include <cmath>
#include <string>

#include "lungx/tensor.hpp"

namespace lungx {

struct LossConfig {
  double alpha = 0.8;        // focal class-balance weight on the positive class
  double gamma = 2.0;        // focusing exponent
  double bce_weight = 0.5;
  double focal_weight = 0.5;
  double clamp_eps = 1e-7;   // probability clamp against log(0)

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) tensor_fail("loss: alpha must lie in (0,1)");
    if (gamma < 0.0) tensor_fail("loss: gamma must be >= 0");
    if (std::fabs(bce_weight + focal_weight - 1.0) > 1e-12)
      tensor_fail("loss: bce and focal weights must sum to 1");
    if (!(clamp_eps > 0.0 && clamp_eps < 0.5)) tensor_fail("loss: clamp epsilon out of range");
  }
};

namespace detail {

template <typename T>
inline void check_loss_inputs(const Tensor<T>& p, const Tensor<T>& y) {
  if (p.numel() != y.numel())
    tensor_fail("loss: probability shape " + shape_str(p.shape()) + " does not match labels " +
                shape_str(y.shape()));
  for (T v : y.data())
    if (v != T(0) && v != T(1))
      tensor_fail("loss: labels must be 0 or 1, got " + std::to_string(static_cast<double>(v)));
}

}  // namespace detail

/// Batch-averaged binary cross entropy on probabilities; p is clamped to
/// [eps, 1-eps] before the logs.
template <typename T>
inline Tensor<T> bce_loss(const Tensor<T>& p, const Tensor<T>& y, T eps = T(1e-7)) {
  detail::check_loss_inputs(p, y);
  auto ones = Tensor<T>::full(p.shape(), T(1));
  auto pc = clamp(p, eps, T(1) - eps);
  auto pos = mul(y, log_op(pc));
  auto neg_term = mul(sub(ones, y), log_op(sub(ones, pc)));
  return neg(mean_all(add(pos, neg_term)));
}

/// Batch-averaged alpha-balanced focal loss:
/// -alpha_t * (1 - p_t)^gamma * log(p_t) with p_t = y*p + (1-y)*(1-p).
template <typename T>
inline Tensor<T> focal_loss(const Tensor<T>& p, const Tensor<T>& y, T alpha, T gamma,
                            T eps = T(1e-7)) {
  detail::check_loss_inputs(p, y);
  auto ones = Tensor<T>::full(p.shape(), T(1));
  auto pc = clamp(p, eps, T(1) - eps);
  auto one_minus_y = sub(ones, y);
  auto pt = add(mul(y, pc), mul(one_minus_y, sub(ones, pc)));
  auto alpha_t = add(scale(y, alpha), scale(one_minus_y, T(1) - alpha));  // untracked
  auto modulating = pow_const(sub(ones, pt), gamma);
  return neg(mean_all(mul(mul(alpha_t, modulating), log_op(pt))));
}

/// The training objective: bce_weight * BCE + focal_weight * Focal.
template <typename T>
inline Tensor<T> combined_loss(const Tensor<T>& p, const Tensor<T>& y, const LossConfig& cfg) {
  cfg.validate();
  T eps = static_cast<T>(cfg.clamp_eps);
  auto b = bce_loss(p, y, eps);
  auto f = focal_loss(p, y, static_cast<T>(cfg.alpha), static_cast<T>(cfg.gamma), eps);
  return add(scale(b, static_cast<T>(cfg.bce_weight)), scale(f, static_cast<T>(cfg.focal_weight)));
}

}  // namespace lungx
