#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include "lungx/tensor.hpp"

namespace lungx {

/// Layer normalization over the last axis with per-feature affine params.
template <typename T>
inline Tensor<T> layernorm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps) {
  if (eps <= T(0)) tensor_fail("layernorm: eps must be > 0");
  std::size_t D = x.dim(x.rank() - 1);
  if (gain.numel() != D || bias.numel() != D)
    tensor_fail("layernorm: affine params must match the last axis of " + shape_str(x.shape()));
  std::size_t R = x.numel() / D;
  std::vector<T> v(x.numel());
  auto mu = std::make_shared<std::vector<T>>(R);
  auto istd = std::make_shared<std::vector<T>>(R);
  const auto& dx = x.data();
  const auto& dg = gain.data();
  const auto& db = bias.data();
  for (std::size_t r = 0; r < R; ++r) {
    const T* row = dx.data() + r * D;
    T m = T(0);
    for (std::size_t i = 0; i < D; ++i) m += row[i];
    m /= static_cast<T>(D);
    T var = T(0);
    for (std::size_t i = 0; i < D; ++i) {
      T d = row[i] - m;
      var += d * d;
    }
    var /= static_cast<T>(D);
    T is = T(1) / std::sqrt(var + eps);
    (*mu)[r] = m;
    (*istd)[r] = is;
    T* orow = v.data() + r * D;
    for (std::size_t i = 0; i < D; ++i) orow[i] = dg[i] * (row[i] - m) * is + db[i];
  }
  Tensor<T> out = Tensor<T>::from(std::move(v), x.shape());
  attach_tape<T>(out, "layernorm", {x, gain, bias}, [x, gain, bias, R, D, mu, istd](TensorNode<T>& self) mutable {
    const auto& g = self.grad;
    const auto& dx2 = x.data();
    const auto& dg = gain.data();
    for (std::size_t r = 0; r < R; ++r) {
      const T* grow = g.data() + r * D;
      const T* row = dx2.data() + r * D;
      T m = (*mu)[r], is = (*istd)[r];
      T sum_gh = T(0), sum_ghx = T(0);
      for (std::size_t i = 0; i < D; ++i) {
        T xhat = (row[i] - m) * is;
        T gh = grow[i] * dg[i];
        sum_gh += gh;
        sum_ghx += gh * xhat;
      }
      if (x.tracked()) {
        T* gx = x.grad().data() + r * D;
        T invd = T(1) / static_cast<T>(D);
        for (std::size_t i = 0; i < D; ++i) {
          T xhat = (row[i] - m) * is;
          T gh = grow[i] * dg[i];
          gx[i] += is * (gh - sum_gh * invd - xhat * sum_ghx * invd);
        }
      }
      if (gain.tracked()) {
        T* gg = gain.grad().data();
        for (std::size_t i = 0; i < D; ++i) gg[i] += grow[i] * (row[i] - m) * is;
      }
      if (bias.tracked()) {
        T* gb = bias.grad().data();
        for (std::size_t i = 0; i < D; ++i) gb[i] += grow[i];
      }
    }
  });
  return out;
}

template <typename T>
struct RunningStats {
  std::vector<T> mean;
  std::vector<T> var;
};

/// Batch normalization over channel axis 1 of [B,C,...]. Train mode
/// normalizes with batch statistics and updates the running stats; eval
/// mode normalizes with the stored running stats.
template <typename T>
inline Tensor<T> batchnorm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                           RunningStats<T>& stats, bool train, T momentum, T eps) {
  if (eps <= T(0)) tensor_fail("batchnorm: eps must be > 0");
  if (x.rank() < 2) tensor_fail("batchnorm: expects at least [B,C], got " + shape_str(x.shape()));
  std::size_t B = x.dim(0), C = x.dim(1);
  std::size_t S = x.numel() / (B * C);  // spatial footprint per channel slice
  if (gain.numel() != C || bias.numel() != C || stats.mean.size() != C || stats.var.size() != C)
    tensor_fail("batchnorm: affine/running params must have C entries");
  std::size_t m = B * S;

  std::vector<T> v(x.numel());
  auto mu = std::make_shared<std::vector<T>>(C);
  auto istd = std::make_shared<std::vector<T>>(C);
  const auto& dx = x.data();
  const auto& dg = gain.data();
  const auto& db = bias.data();

  if (train) {
    for (std::size_t c = 0; c < C; ++c) {
      T sum = T(0);
      for (std::size_t b = 0; b < B; ++b) {
        const T* p = dx.data() + (b * C + c) * S;
        for (std::size_t i = 0; i < S; ++i) sum += p[i];
      }
      T mean = sum / static_cast<T>(m);
      T var = T(0);
      for (std::size_t b = 0; b < B; ++b) {
        const T* p = dx.data() + (b * C + c) * S;
        for (std::size_t i = 0; i < S; ++i) {
          T d = p[i] - mean;
          var += d * d;
        }
      }
      var /= static_cast<T>(m);
      (*mu)[c] = mean;
      (*istd)[c] = T(1) / std::sqrt(var + eps);
      T unbiased = m > 1 ? var * static_cast<T>(m) / static_cast<T>(m - 1) : var;
      stats.mean[c] = (T(1) - momentum) * stats.mean[c] + momentum * mean;
      stats.var[c] = (T(1) - momentum) * stats.var[c] + momentum * unbiased;
    }
  } else {
    for (std::size_t c = 0; c < C; ++c) {
      (*mu)[c] = stats.mean[c];
      (*istd)[c] = T(1) / std::sqrt(stats.var[c] + eps);
    }
  }

  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c) {
      const T* p = dx.data() + (b * C + c) * S;
      T* o = v.data() + (b * C + c) * S;
      T mean = (*mu)[c], is = (*istd)[c], gm = dg[c], bt = db[c];
      for (std::size_t i = 0; i < S; ++i) o[i] = gm * (p[i] - mean) * is + bt;
    }

  Tensor<T> out = Tensor<T>::from(std::move(v), x.shape());
  attach_tape<T>(out, "batchnorm", {x, gain, bias},
                 [x, gain, bias, B, C, S, m, mu, istd, train](TensorNode<T>& self) mutable {
                   const auto& g = self.grad;
                   const auto& dx2 = x.data();
                   const auto& dg = gain.data();
                   for (std::size_t c = 0; c < C; ++c) {
                     T mean = (*mu)[c], is = (*istd)[c];
                     T s1 = T(0), s2 = T(0);
                     for (std::size_t b = 0; b < B; ++b) {
                       const T* gp = g.data() + (b * C + c) * S;
                       const T* p = dx2.data() + (b * C + c) * S;
                       for (std::size_t i = 0; i < S; ++i) {
                         s1 += gp[i];
                         s2 += gp[i] * (p[i] - mean) * is;
                       }
                     }
                     if (gain.tracked()) gain.grad()[c] += s2;
                     if (bias.tracked()) bias.grad()[c] += s1;
                     if (x.tracked()) {
                       T gm = dg[c];
                       T invm = T(1) / static_cast<T>(m);
                       for (std::size_t b = 0; b < B; ++b) {
                         const T* gp = g.data() + (b * C + c) * S;
                         const T* p = dx2.data() + (b * C + c) * S;
                         T* gx = x.grad().data() + (b * C + c) * S;
                         for (std::size_t i = 0; i < S; ++i) {
                           if (train) {
                             T xhat = (p[i] - mean) * is;
                             gx[i] += gm * is * (gp[i] - s1 * invm - xhat * s2 * invm);
                           } else {
                             gx[i] += gm * is * gp[i];
                           }
                         }
                       }
                     }
                   }
                 });
  return out;
}

/// Owning batchnorm module: affine params plus running statistics.
template <typename T>
struct BatchNorm {
  Tensor<T> gain;
  Tensor<T> bias;
  RunningStats<T> stats;
  T momentum = T(0.1);
  T eps = T(1e-5);

  BatchNorm() = default;
  explicit BatchNorm(std::size_t channels)
      : gain(Tensor<T>::full({channels}, T(1), true)),
        bias(Tensor<T>::zeros({channels}, true)),
        stats{std::vector<T>(channels, T(0)), std::vector<T>(channels, T(1))} {}

  Tensor<T> forward(const Tensor<T>& x, bool train) {
    return batchnorm(x, gain, bias, stats, train, momentum, eps);
  }
};

}  // namespace lungx
