#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "lungx/image_ops.hpp"
#include "lungx/norm.hpp"
#include "lungx/tensor.hpp"

namespace lungx {

struct StageConfig {
  std::size_t out_channels = 0;
  std::size_t depth = 1;      // blocks in the stage; stride applies to the first
  std::size_t stride = 1;     // 1 or 2
  std::size_t expansion = 1;  // inverted-bottleneck hidden width multiplier
};

struct BackboneConfig {
  std::size_t in_channels = 1;
  std::size_t stem_channels = 16;
  std::array<StageConfig, 5> stages{};

  static BackboneConfig desk() {
    BackboneConfig c;
    c.in_channels = 1;
    c.stem_channels = 16;
    c.stages = {StageConfig{16, 1, 1, 1}, StageConfig{24, 2, 2, 6}, StageConfig{40, 2, 2, 6},
                StageConfig{80, 3, 2, 6}, StageConfig{112, 3, 2, 6}};
    return c;
  }

  void validate() const {
    std::size_t cum = 2;  // stem stride
    std::array<std::size_t, 5> cum_at{};
    for (std::size_t i = 0; i < 5; ++i) {
      const auto& s = stages[i];
      if (s.out_channels == 0 || s.depth == 0 || s.expansion == 0)
        tensor_fail("backbone: stage " + std::to_string(i + 1) + " has a zero field");
      if (s.stride != 1 && s.stride != 2)
        tensor_fail("backbone: stage stride must be 1 or 2");
      cum *= s.stride;
      cum_at[i] = cum;
    }
    if (cum_at[2] != 8 || cum_at[3] != 16 || cum_at[4] != 32)
      tensor_fail("backbone: cumulative strides at the tap stages must be 8/16/32, got " +
                  std::to_string(cum_at[2]) + "/" + std::to_string(cum_at[3]) + "/" +
                  std::to_string(cum_at[4]));
    if (!(stages[2].out_channels < stages[3].out_channels &&
          stages[3].out_channels < stages[4].out_channels))
      tensor_fail("backbone: tap channel counts must be strictly increasing");
  }
};

/// The three mid-level maps at strides 8/16/32 (ceil division).
template <typename T>
struct FeaturePyramid {
  Tensor<T> c3, c4, c5;
};

// conv (no bias) + batchnorm + optional SiLU
template <typename T>
struct ConvBn {
  Tensor<T> w;
  BatchNorm<T> bn;
  std::size_t stride = 1;
  bool act = true;

  ConvBn() = default;
  ConvBn(std::size_t in, std::size_t out, std::size_t k, std::size_t stride_, bool act_, Rng& rng)
      : w(Tensor<T>::he({out, in, k, k}, in * k * k, rng)), bn(out), stride(stride_), act(act_) {}

  Tensor<T> forward(const Tensor<T>& x, bool train) {
    auto y = bn.forward(conv2d(x, w, Tensor<T>(), stride, kSamePad), train);
    return act ? silu(y) : y;
  }

  void collect(const std::string& p, NamedParams<T>& params, NamedBuffers<T>& buffers) {
    params.push_back({p + ".w", w});
    params.push_back({p + ".bn.gain", bn.gain});
    params.push_back({p + ".bn.bias", bn.bias});
    buffers.push_back({p + ".bn.running_mean", &bn.stats.mean});
    buffers.push_back({p + ".bn.running_var", &bn.stats.var});
  }
};

/// Inverted bottleneck: expand 1x1 -> depthwise 3x3 -> project 1x1, residual
/// when stride is 1 and channel counts match.
template <typename T>
struct MBConv {
  bool has_expand = false;
  ConvBn<T> expand;  // 1x1
  Tensor<T> dw_w;    // [hidden,1,3,3]
  BatchNorm<T> dw_bn;
  std::size_t stride = 1;
  Tensor<T> proj_w;  // 1x1
  BatchNorm<T> proj_bn;
  bool residual = false;

  MBConv(std::size_t in, std::size_t out, std::size_t stride_, std::size_t expansion, Rng& rng)
      : stride(stride_) {
    std::size_t hidden = in * expansion;
    has_expand = expansion > 1;
    if (has_expand) expand = ConvBn<T>(in, hidden, 1, 1, true, rng);
    dw_w = Tensor<T>::he({hidden, 1, 3, 3}, 9, rng);
    dw_bn = BatchNorm<T>(hidden);
    proj_w = Tensor<T>::he({out, hidden, 1, 1}, hidden, rng);
    proj_bn = BatchNorm<T>(out);
    residual = stride == 1 && in == out;
  }

  Tensor<T> forward(const Tensor<T>& x, bool train) {
    Tensor<T> h = has_expand ? expand.forward(x, train) : x;
    h = silu(dw_bn.forward(depthwise_conv2d(h, dw_w, Tensor<T>(), stride, kSamePad), train));
    h = proj_bn.forward(conv2d(h, proj_w), train);
    return residual ? add(h, x) : h;
  }

  void collect(const std::string& p, NamedParams<T>& params, NamedBuffers<T>& buffers) {
    if (has_expand) expand.collect(p + ".expand", params, buffers);
    params.push_back({p + ".dw.w", dw_w});
    params.push_back({p + ".dw.bn.gain", dw_bn.gain});
    params.push_back({p + ".dw.bn.bias", dw_bn.bias});
    buffers.push_back({p + ".dw.bn.running_mean", &dw_bn.stats.mean});
    buffers.push_back({p + ".dw.bn.running_var", &dw_bn.stats.var});
    params.push_back({p + ".proj.w", proj_w});
    params.push_back({p + ".proj.bn.gain", proj_bn.gain});
    params.push_back({p + ".proj.bn.bias", proj_bn.bias});
    buffers.push_back({p + ".proj.bn.running_mean", &proj_bn.stats.mean});
    buffers.push_back({p + ".proj.bn.running_var", &proj_bn.stats.var});
  }
};

/// Staged convolutional extractor tapping stages 3/4/5 at strides 8/16/32.
template <typename T>
struct Backbone {
  BackboneConfig cfg;
  ConvBn<T> stem;
  std::vector<std::vector<MBConv<T>>> stages;

  Backbone(const BackboneConfig& config, Rng& rng) : cfg(config) {
    cfg.validate();
    stem = ConvBn<T>(cfg.in_channels, cfg.stem_channels, 3, 2, true, rng);
    std::size_t in = cfg.stem_channels;
    for (const auto& sc : cfg.stages) {
      std::vector<MBConv<T>> blocks;
      blocks.reserve(sc.depth);
      for (std::size_t b = 0; b < sc.depth; ++b) {
        blocks.emplace_back(in, sc.out_channels, b == 0 ? sc.stride : 1, sc.expansion, rng);
        in = sc.out_channels;
      }
      stages.push_back(std::move(blocks));
    }
  }

  FeaturePyramid<T> forward(const Tensor<T>& images, bool train) {
    if (images.rank() != 4 || images.dim(1) != cfg.in_channels)
      tensor_fail("backbone: expects [B," + std::to_string(cfg.in_channels) + ",H,W], got " +
                  shape_str(images.shape()));
    if (images.dim(2) < 32 || images.dim(3) < 32)
      tensor_fail("backbone: input " + shape_str(images.shape()) +
                  " is below the 32x32 minimum");
    Tensor<T> h = stem.forward(images, train);
    FeaturePyramid<T> pyr;
    for (std::size_t s = 0; s < stages.size(); ++s) {
      for (auto& blk : stages[s]) h = blk.forward(h, train);
      if (s == 2) pyr.c3 = h;
      if (s == 3) pyr.c4 = h;
      if (s == 4) pyr.c5 = h;
    }
    return pyr;
  }

  void collect(const std::string& p, NamedParams<T>& params, NamedBuffers<T>& buffers) {
    stem.collect(p + ".stem", params, buffers);
    for (std::size_t s = 0; s < stages.size(); ++s)
      for (std::size_t b = 0; b < stages[s].size(); ++b)
        stages[s][b].collect(p + ".s" + std::to_string(s + 1) + ".b" + std::to_string(b), params,
                             buffers);
  }
};

}  // namespace lungx
