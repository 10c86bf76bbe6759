#pragma once

#include <string>
#include <vector>

#include "lungx/attention.hpp"
#include "lungx/backbone.hpp"
#include "lungx/transformer.hpp"

namespace lungx {

struct ModelConfig {
  std::size_t input_size = 64;  // pins the positional-embedding token count
  BackboneConfig backbone = BackboneConfig::desk();
  CbamConfig cbam;
  std::size_t fusion_dim = 32;
  ViTConfig vit;
  double head_dropout = 0.1;

  static ModelConfig desk() { return ModelConfig{}; }

  // DeiT-Small dimensions on top of wider taps; not exercised by the tests,
  // provided as the full-size preset
  static ModelConfig paper_scale() {
    ModelConfig c;
    c.input_size = 300;
    c.backbone.stem_channels = 40;
    c.backbone.stages = {StageConfig{24, 2, 1, 1}, StageConfig{32, 3, 2, 6}, StageConfig{48, 3, 2, 6},
                         StageConfig{96, 5, 2, 6}, StageConfig{136, 5, 2, 6}};
    c.cbam.reduction = 16;
    c.fusion_dim = 96;
    c.vit = ViTConfig{4, 384, 6, 12, 4, 0.1};
    return c;
  }

  std::size_t fused_h() const { return (input_size + 7) / 8; }
  std::size_t fused_w() const { return fused_h(); }

  void validate() const {
    backbone.validate();
    cbam.validate();
    vit.validate();
    if (fusion_dim == 0) tensor_fail("model: fusion_dim must be positive");
    if (input_size < 32) tensor_fail("model: input_size must be at least 32");
  }
};

/// The full pipeline: backbone pyramid -> per-scale CBAM -> fusion ->
/// patchify -> transformer encoder -> sigmoid head.
template <typename T>
struct LungXModel {
  ModelConfig cfg;
  Backbone<T> backbone;
  Cbam<T> cbam3, cbam4, cbam5;
  Fusion<T> fusion;
  PatchEmbed<T> embed;
  std::vector<EncoderBlock<T>> blocks;
  Tensor<T> final_ln_g, final_ln_b;
  Head<T> head;

  LungXModel(const ModelConfig& config, Rng& rng) : cfg(config), backbone((cfg.validate(), cfg.backbone), rng) {
    std::size_t c3 = cfg.backbone.stages[2].out_channels;
    std::size_t c4 = cfg.backbone.stages[3].out_channels;
    std::size_t c5 = cfg.backbone.stages[4].out_channels;
    cbam3 = Cbam<T>(c3, cfg.cbam, rng);
    cbam4 = Cbam<T>(c4, cfg.cbam, rng);
    cbam5 = Cbam<T>(c5, cfg.cbam, rng);
    fusion = Fusion<T>(c3, c4, c5, cfg.fusion_dim, rng);
    embed = PatchEmbed<T>(cfg.fusion_dim, cfg.vit.dim, cfg.fused_h(), cfg.fused_w(), rng);
    blocks.reserve(cfg.vit.depth);
    for (std::size_t i = 0; i < cfg.vit.depth; ++i)
      blocks.emplace_back(cfg.vit.dim, cfg.vit.heads, cfg.vit.mlp_ratio, cfg.vit.dropout, rng);
    final_ln_g = Tensor<T>::full({cfg.vit.dim}, T(1), true);
    final_ln_b = Tensor<T>::zeros({cfg.vit.dim}, true);
    head = Head<T>(cfg.vit.dim, std::max<std::size_t>(1, cfg.vit.dim / 2), cfg.head_dropout, rng);
  }

  struct Output {
    Tensor<T> logit;  // [B,1]
    Tensor<T> prob;   // [B,1], strictly in (0,1)
    Tensor<T> fused;  // [B,Df,H/8,W/8] fused map feeding the transformer
    FeaturePyramid<T> pyramid;
  };

  Output forward(const Tensor<T>& images, bool train, Rng& rng) {
    Output out;
    out.pyramid = backbone.forward(images, train);
    FeaturePyramid<T> refined{cbam3.forward(out.pyramid.c3), cbam4.forward(out.pyramid.c4),
                              cbam5.forward(out.pyramid.c5)};
    out.fused = fusion.forward(refined);
    auto tokens = embed.forward(out.fused).tokens;
    for (auto& blk : blocks) tokens = blk.forward(tokens, train, rng);
    tokens = layernorm(tokens, final_ln_g, final_ln_b, T(1e-5));
    auto cls = reshape(slice(tokens, 1, 0, 1), {images.dim(0), cfg.vit.dim});
    out.logit = head.logit(cls, train, rng);
    out.prob = sigmoid(out.logit);
    return out;
  }

  NamedParams<T> named_params() {
    NamedParams<T> params;
    NamedBuffers<T> buffers;
    collect(params, buffers);
    return params;
  }

  NamedBuffers<T> named_buffers() {
    NamedParams<T> params;
    NamedBuffers<T> buffers;
    collect(params, buffers);
    return buffers;
  }

  std::size_t param_count() {
    std::size_t n = 0;
    for (auto& [name, t] : named_params()) n += t.numel();
    return n;
  }

  void zero_grad() {
    for (auto& [name, t] : named_params()) t.zero_grad();
  }

 private:
  void collect(NamedParams<T>& params, NamedBuffers<T>& buffers) {
    backbone.collect("backbone", params, buffers);
    cbam3.collect("cbam3", params, buffers);
    cbam4.collect("cbam4", params, buffers);
    cbam5.collect("cbam5", params, buffers);
    fusion.collect("fusion", params, buffers);
    embed.collect("embed", params, buffers);
    for (std::size_t i = 0; i < blocks.size(); ++i)
      blocks[i].collect("vit.b" + std::to_string(i), params, buffers);
    params.push_back({"final_ln.g", final_ln_g});
    params.push_back({"final_ln.b", final_ln_b});
    head.collect("head", params, buffers);
  }
};

}  // namespace lungx
