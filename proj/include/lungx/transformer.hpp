#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "lungx/image_ops.hpp"
#include "lungx/norm.hpp"
#include "lungx/tensor.hpp"

namespace lungx {

struct ViTConfig {
  std::size_t patch = 4;  // fixed
  std::size_t dim = 64;
  std::size_t heads = 4;
  std::size_t depth = 4;
  std::size_t mlp_ratio = 4;
  double dropout = 0.1;

  void validate() const {
    if (patch != 4) tensor_fail("vit: patch size is fixed at 4");
    if (dim == 0 || heads == 0 || mlp_ratio == 0) tensor_fail("vit: zero dimension");
    if (dim % heads != 0)
      tensor_fail("vit: embed dim " + std::to_string(dim) + " not divisible by " +
                  std::to_string(heads) + " heads");
  }
};

template <typename T>
struct TokenBatch {
  Tensor<T> tokens;      // [B, N+1, D], class token at index 0
  Tensor<T> positional;  // [1, N+1, D]
};

/// 4x4 patch embedding with bottom/right zero padding to the next multiple
/// of 4, a learnable class token, and learnable positional embeddings sized
/// to the configured fused-map resolution.
template <typename T>
struct PatchEmbed {
  std::size_t patch = 4;
  Tensor<T> w;    // [D, Df, 4, 4]
  Tensor<T> b;    // [D]
  Tensor<T> cls;  // [1, 1, D]
  Tensor<T> pos;  // [1, N+1, D], zero-initialized

  PatchEmbed() = default;
  PatchEmbed(std::size_t in_dim, std::size_t embed_dim, std::size_t fused_h, std::size_t fused_w,
             Rng& rng) {
    w = Tensor<T>::he({embed_dim, in_dim, patch, patch}, in_dim * patch * patch, rng);
    b = Tensor<T>::zeros({embed_dim}, true);
    cls = Tensor<T>::randn({1, 1, embed_dim}, rng, T(0.02), T(0), true);
    pos = Tensor<T>::zeros({1, token_count(fused_h, fused_w), embed_dim}, true);
  }

  static std::size_t token_count(std::size_t h, std::size_t w) {
    return ((h + 3) / 4) * ((w + 3) / 4) + 1;
  }

  std::size_t tokens() const { return pos.dim(1); }

  TokenBatch<T> forward(const Tensor<T>& fused) const {
    std::size_t bsz = fused.dim(0), h = fused.dim(2), wd = fused.dim(3);
    std::size_t want = token_count(h, wd);
    if (want != tokens())
      tensor_fail("patchify: fused map " + shape_str(fused.shape()) + " yields " +
                  std::to_string(want) + " tokens but positional embedding holds " +
                  std::to_string(tokens()));
    auto padded = pad2d(fused, 0, (patch - h % patch) % patch, 0, (patch - wd % patch) % patch);
    auto grid = conv2d(padded, w, b, patch, 0);  // [B, D, h/4, w/4]
    std::size_t d = grid.dim(1), n = grid.dim(2) * grid.dim(3);
    auto seq = permute(reshape(grid, {bsz, d, n}), {0, 2, 1});  // [B, N, D]
    auto with_cls = concat<T>({repeat_axis0(cls, bsz), seq}, 1);
    return {add(with_cls, pos), pos};
  }

  void collect(const std::string& p, NamedParams<T>& params, NamedBuffers<T>&) {
    params.push_back({p + ".patch.w", w});
    params.push_back({p + ".patch.b", b});
    params.push_back({p + ".cls", cls});
    params.push_back({p + ".pos", pos});
  }
};

/// Multi-head scaled dot-product self-attention over [B, N, D].
template <typename T>
struct Mhsa {
  std::size_t heads = 1;
  Tensor<T> wq, bq, wk, bk, wv, bv, wo, bo;

  Mhsa() = default;
  Mhsa(std::size_t dim, std::size_t heads_, Rng& rng) : heads(heads_) {
    if (dim % heads != 0) tensor_fail("mhsa: dim not divisible by heads");
    auto make_w = [&] { return Tensor<T>::he({dim, dim}, dim, rng); };
    auto make_b = [&] { return Tensor<T>::zeros({dim}, true); };
    wq = make_w(); bq = make_b();
    wk = make_w(); bk = make_b();
    wv = make_w(); bv = make_b();
    wo = make_w(); bo = make_b();
  }

  // attn_out, when given, receives the [B*heads, N, N] attention rows
  Tensor<T> forward(const Tensor<T>& x, Tensor<T>* attn_out = nullptr) const {
    std::size_t bsz = x.dim(0), n = x.dim(1), d = x.dim(2);
    std::size_t dh = d / heads;
    auto split = [&](const Tensor<T>& t) {
      return reshape(permute(reshape(t, {bsz, n, heads, dh}), {0, 2, 1, 3}), {bsz * heads, n, dh});
    };
    auto q = split(linear(x, wq, bq));
    auto k = split(linear(x, wk, bk));
    auto v = split(linear(x, wv, bv));
    q = scale(q, static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh))));
    auto att = softmax(matmul(q, permute(k, {0, 2, 1})), 2);
    if (attn_out) *attn_out = att;
    auto ctx = matmul(att, v);  // [B*h, N, dh]
    auto merged = reshape(permute(reshape(ctx, {bsz, heads, n, dh}), {0, 2, 1, 3}), {bsz, n, d});
    return linear(merged, wo, bo);
  }

  void collect(const std::string& p, NamedParams<T>& params, NamedBuffers<T>&) {
    params.push_back({p + ".wq", wq});
    params.push_back({p + ".bq", bq});
    params.push_back({p + ".wk", wk});
    params.push_back({p + ".bk", bk});
    params.push_back({p + ".wv", wv});
    params.push_back({p + ".bv", bv});
    params.push_back({p + ".wo", wo});
    params.push_back({p + ".bo", bo});
  }
};

/// Pre-norm encoder block: x += MHSA(LN(x)); x += MLP(LN(x)) with GELU.
template <typename T>
struct EncoderBlock {
  Tensor<T> ln1_g, ln1_b, ln2_g, ln2_b;
  Mhsa<T> attn;
  Tensor<T> mlp_w1, mlp_b1, mlp_w2, mlp_b2;
  double drop = 0.0;
  T ln_eps = T(1e-5);

  EncoderBlock() = default;
  EncoderBlock(std::size_t dim, std::size_t heads, std::size_t mlp_ratio, double dropout_rate,
               Rng& rng)
      : attn(dim, heads, rng), drop(dropout_rate) {
    ln1_g = Tensor<T>::full({dim}, T(1), true);
    ln1_b = Tensor<T>::zeros({dim}, true);
    ln2_g = Tensor<T>::full({dim}, T(1), true);
    ln2_b = Tensor<T>::zeros({dim}, true);
    std::size_t hidden = dim * mlp_ratio;
    mlp_w1 = Tensor<T>::he({hidden, dim}, dim, rng);
    mlp_b1 = Tensor<T>::zeros({hidden}, true);
    mlp_w2 = Tensor<T>::he({dim, hidden}, hidden, rng);
    mlp_b2 = Tensor<T>::zeros({dim}, true);
  }

  Tensor<T> forward(const Tensor<T>& x, bool train, Rng& rng) const {
    auto a = attn.forward(layernorm(x, ln1_g, ln1_b, ln_eps));
    auto h = add(x, dropout(a, drop, train, rng));
    auto m = linear(dropout(gelu(linear(layernorm(h, ln2_g, ln2_b, ln_eps), mlp_w1, mlp_b1)), drop,
                            train, rng),
                    mlp_w2, mlp_b2);
    return add(h, dropout(m, drop, train, rng));
  }

  void collect(const std::string& p, NamedParams<T>& params, NamedBuffers<T>& buffers) {
    params.push_back({p + ".ln1.g", ln1_g});
    params.push_back({p + ".ln1.b", ln1_b});
    attn.collect(p + ".attn", params, buffers);
    params.push_back({p + ".ln2.g", ln2_g});
    params.push_back({p + ".ln2.b", ln2_b});
    params.push_back({p + ".mlp.w1", mlp_w1});
    params.push_back({p + ".mlp.b1", mlp_b1});
    params.push_back({p + ".mlp.w2", mlp_w2});
    params.push_back({p + ".mlp.b2", mlp_b2});
  }
};

/// Two-layer classification head with batchnorm, GELU and dropout, ending in
/// a single logit.
template <typename T>
struct Head {
  Tensor<T> w1, b1;  // D -> Dh
  BatchNorm<T> bn;
  Tensor<T> w2, b2;  // Dh -> 1
  double drop = 0.0;

  Head() = default;
  Head(std::size_t dim, std::size_t hidden, double dropout_rate, Rng& rng) : drop(dropout_rate) {
    w1 = Tensor<T>::he({hidden, dim}, dim, rng);
    b1 = Tensor<T>::zeros({hidden}, true);
    bn = BatchNorm<T>(hidden);
    w2 = Tensor<T>::he({1, hidden}, hidden, rng);
    b2 = Tensor<T>::zeros({1}, true);
  }

  Tensor<T> logit(const Tensor<T>& cls_token, bool train, Rng& rng) {
    auto h = gelu(bn.forward(linear(cls_token, w1, b1), train));
    return linear(dropout(h, drop, train, rng), w2, b2);
  }

  void collect(const std::string& p, NamedParams<T>& params, NamedBuffers<T>& buffers) {
    params.push_back({p + ".fc1.w", w1});
    params.push_back({p + ".fc1.b", b1});
    params.push_back({p + ".bn.gain", bn.gain});
    params.push_back({p + ".bn.bias", bn.bias});
    buffers.push_back({p + ".bn.running_mean", &bn.stats.mean});
    buffers.push_back({p + ".bn.running_var", &bn.stats.var});
    params.push_back({p + ".fc2.w", w2});
    params.push_back({p + ".fc2.b", b2});
  }
};

/// Pneumonia probability from the class token; outputs strictly in (0,1).
template <typename T>
inline Tensor<T> classify(const Tensor<T>& cls_token, Head<T>& head, bool train, Rng& rng) {
  return sigmoid(head.logit(cls_token, train, rng));
}

}  // namespace lungx
