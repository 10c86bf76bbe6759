#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "lungx/tensor.hpp"

namespace lungx {

/// AdamW with decoupled weight decay: the decay term is applied to the
/// parameter directly, outside the adaptive gradient step.
template <typename T>
class AdamW {
 public:
  explicit AdamW(NamedParams<T> params, double weight_decay = 1e-4, double beta1 = 0.9,
                 double beta2 = 0.999, double eps = 1e-8)
      : params_(std::move(params)), wd_(weight_decay), b1_(beta1), b2_(beta2), eps_(eps) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (auto& [name, t] : params_) {
      m_.emplace_back(t.numel(), T(0));
      v_.emplace_back(t.numel(), T(0));
    }
  }

  void step(double lr) {
    ++t_;
    double bc1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& [name, p] = params_[i];
      if (p.numel() != m_[i].size())
        tensor_fail("adamw: parameter '" + name + "' no longer matches its moment buffers");
      auto& theta = p.data();
      const T* g = p.has_grad() ? p.grad().data() : nullptr;
      T* m = m_[i].data();
      T* v = v_[i].data();
      for (std::size_t j = 0; j < theta.size(); ++j) {
        T gj = g ? g[j] : T(0);
        m[j] = static_cast<T>(b1_) * m[j] + static_cast<T>(1.0 - b1_) * gj;
        v[j] = static_cast<T>(b2_) * v[j] + static_cast<T>(1.0 - b2_) * gj * gj;
        double mhat = static_cast<double>(m[j]) / bc1;
        double vhat = static_cast<double>(v[j]) / bc2;
        double update = mhat / (std::sqrt(vhat) + eps_) + wd_ * static_cast<double>(theta[j]);
        theta[j] -= static_cast<T>(lr * update);
      }
    }
  }

  void zero_grad() {
    for (auto& [name, p] : params_) p.zero_grad();
  }

  std::size_t step_count() const { return t_; }

 private:
  NamedParams<T> params_;
  std::vector<std::vector<T>> m_, v_;
  double wd_, b1_, b2_, eps_;
  std::size_t t_ = 0;
};

/// Scales all gradients so the global L2 norm does not exceed max_norm;
/// returns the observed pre-clip norm.
template <typename T>
inline double clip_grad_norm(NamedParams<T>& params, double max_norm = 1.0) {
  double sq = 0.0;
  for (auto& [name, p] : params) {
    if (!p.has_grad()) continue;
    for (T g : p.grad()) sq += static_cast<double>(g) * static_cast<double>(g);
  }
  double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    T s = static_cast<T>(max_norm / norm);
    for (auto& [name, p] : params) {
      if (!p.has_grad()) continue;
      for (T& g : p.grad()) g *= s;
    }
  }
  return norm;
}

/// One-cycle schedule: cosine ramp peak/start_div -> peak over the warmup
/// fraction, then cosine anneal down to peak/final_div.
struct OneCycle {
  std::size_t total_steps = 1;
  double peak = 2e-4;
  double warmup_frac = 0.3;
  double start_div = 25.0;
  double final_div = 1e4;

  double lr_at(std::size_t step) const {
    if (step > total_steps)
      throw std::invalid_argument("lr_at: step " + std::to_string(step) + " beyond total " +
                                  std::to_string(total_steps));
    constexpr double pi = 3.14159265358979323846;
    double start = peak / start_div;
    double fin = peak / final_div;
    double warm_end = warmup_frac * static_cast<double>(total_steps);
    double t = static_cast<double>(step);
    if (t <= warm_end) {
      if (warm_end <= 0.0) return peak;
      double u = t / warm_end;
      return start + (peak - start) * 0.5 * (1.0 - std::cos(pi * u));
    }
    double u = (t - warm_end) / (static_cast<double>(total_steps) - warm_end);
    return fin + (peak - fin) * 0.5 * (1.0 + std::cos(pi * u));
  }
};

/// Patience counter on validation AUC. Improvement is strict at 1e-6
/// granularity; the stop flag raises exactly when the stale count reaches
/// the patience.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience = 7, double min_delta = 1e-6)
      : patience_(patience), min_delta_(min_delta) {}

  // returns true when this epoch strictly improved the best AUC
  bool update(double auc, std::size_t epoch) {
    if (auc > best_ + min_delta_) {
      best_ = auc;
      best_epoch_ = epoch;
      stale_ = 0;
      return true;
    }
    ++stale_;
    return false;
  }

  bool should_stop() const { return stale_ >= patience_; }
  double best() const { return best_; }
  std::size_t best_epoch() const { return best_epoch_; }
  std::size_t stale() const { return stale_; }

 private:
  std::size_t patience_;
  double min_delta_;
  double best_ = -std::numeric_limits<double>::infinity();
  std::size_t best_epoch_ = 0;
  std::size_t stale_ = 0;
};

}  // namespace lungx
