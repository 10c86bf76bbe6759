#pragma once

#include <string>
#include <vector>

#include "lungx/backbone.hpp"
#include "lungx/image_ops.hpp"
#include "lungx/tensor.hpp"

namespace lungx {

struct CbamConfig {
  std::size_t reduction = 8;       // channel-MLP bottleneck ratio
  std::size_t spatial_kernel = 7;  // odd, same-padded

  void validate() const {
    if (reduction == 0) tensor_fail("cbam: reduction must be positive");
    if (spatial_kernel % 2 == 0) tensor_fail("cbam: spatial kernel must be odd");
  }
};

/// Sequential channel-then-spatial multiplicative gating of a [B,C,H,W] map.
/// Channel weights come from a shared two-layer MLP over the average- and
/// max-pooled descriptors; spatial weights from a kxk conv over the stacked
/// channel-mean and channel-max maps.
template <typename T>
struct Cbam {
  std::size_t channels = 0;
  Tensor<T> mlp_w1, mlp_b1;  // C -> hidden
  Tensor<T> mlp_w2, mlp_b2;  // hidden -> C
  Tensor<T> spatial_w;       // [1,2,k,k]
  Tensor<T> spatial_b;       // [1]

  Cbam() = default;
  Cbam(std::size_t c, const CbamConfig& cfg, Rng& rng) : channels(c) {
    cfg.validate();
    std::size_t hidden = std::max<std::size_t>(1, c / cfg.reduction);
    mlp_w1 = Tensor<T>::he({hidden, c}, c, rng);
    mlp_b1 = Tensor<T>::zeros({hidden}, true);
    mlp_w2 = Tensor<T>::he({c, hidden}, hidden, rng);
    mlp_b2 = Tensor<T>::zeros({c}, true);
    std::size_t k = cfg.spatial_kernel;
    spatial_w = Tensor<T>::he({1, 2, k, k}, 2 * k * k, rng);
    spatial_b = Tensor<T>::zeros({1}, true);
  }

  // shared MLP over a pooled [B,C,1,1] descriptor
  Tensor<T> mlp(const Tensor<T>& pooled) const {
    std::size_t b = pooled.dim(0);
    auto flat = reshape(pooled, {b, channels});
    return linear(relu(linear(flat, mlp_w1, mlp_b1)), mlp_w2, mlp_b2);
  }

  /// [B,C,1,1] gate, entries strictly in (0,1)
  Tensor<T> channel_weights(const Tensor<T>& f) const {
    auto avg = mlp(global_pool(f, PoolKind::Avg));
    auto mx = mlp(global_pool(f, PoolKind::Max));
    return reshape(sigmoid(add(avg, mx)), {f.dim(0), channels, 1, 1});
  }

  /// [B,1,H,W] gate, entries strictly in (0,1)
  Tensor<T> spatial_weights(const Tensor<T>& f) const {
    auto mean_map = reduce_mean(f, 1, true);
    auto max_map = reduce_max(f, 1, true);
    auto stacked = concat<T>({mean_map, max_map}, 1);
    return sigmoid(conv2d(stacked, spatial_w, spatial_b, 1, kSamePad));
  }

  Tensor<T> forward(const Tensor<T>& f) const {
    auto refined = mul(f, channel_weights(f));
    return mul(refined, spatial_weights(refined));
  }

  void collect(const std::string& p, NamedParams<T>& params, NamedBuffers<T>&) {
    params.push_back({p + ".mlp.w1", mlp_w1});
    params.push_back({p + ".mlp.b1", mlp_b1});
    params.push_back({p + ".mlp.w2", mlp_w2});
    params.push_back({p + ".mlp.b2", mlp_b2});
    params.push_back({p + ".spatial.w", spatial_w});
    params.push_back({p + ".spatial.b", spatial_b});
  }
};

/// Project each pyramid level to a uniform width with a 1x1 conv (no
/// activation or normalization), resize everything to the stride-8
/// resolution, and sum elementwise.
template <typename T>
struct Fusion {
  std::size_t out_dim = 0;
  Tensor<T> w3, b3, w4, b4, w5, b5;

  Fusion() = default;
  Fusion(std::size_t c3, std::size_t c4, std::size_t c5, std::size_t df, Rng& rng) : out_dim(df) {
    w3 = Tensor<T>::he({df, c3, 1, 1}, c3, rng);
    b3 = Tensor<T>::zeros({df}, true);
    w4 = Tensor<T>::he({df, c4, 1, 1}, c4, rng);
    b4 = Tensor<T>::zeros({df}, true);
    w5 = Tensor<T>::he({df, c5, 1, 1}, c5, rng);
    b5 = Tensor<T>::zeros({df}, true);
  }

  Tensor<T> forward(const FeaturePyramid<T>& pyr) const {
    if (pyr.c3.dim(0) != pyr.c4.dim(0) || pyr.c3.dim(0) != pyr.c5.dim(0))
      tensor_fail("fusion: pyramid batch mismatch " + shape_str(pyr.c3.shape()) + " / " +
                  shape_str(pyr.c4.shape()) + " / " + shape_str(pyr.c5.shape()));
    std::size_t th = pyr.c3.dim(2), tw = pyr.c3.dim(3);
    auto p3 = conv2d(pyr.c3, w3, b3);
    auto p4 = bilinear_resize(conv2d(pyr.c4, w4, b4), th, tw);
    auto p5 = bilinear_resize(conv2d(pyr.c5, w5, b5), th, tw);
    return add(add(p3, p4), p5);
  }

  void collect(const std::string& p, NamedParams<T>& params, NamedBuffers<T>&) {
    params.push_back({p + ".p3.w", w3});
    params.push_back({p + ".p3.b", b3});
    params.push_back({p + ".p4.w", w4});
    params.push_back({p + ".p4.b", b4});
    params.push_back({p + ".p5.w", w5});
    params.push_back({p + ".p5.b", b5});
  }
};

}  // namespace lungx
