#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "lungx/tensor.hpp"

namespace lungx {

// padding = kSamePad selects ceil(in/stride) output with asymmetric pads
// (extra row/column on bottom/right); any value >= 0 is an explicit
// symmetric pad.
constexpr int kSamePad = -1;

namespace detail {

struct ConvGeom {
  std::size_t pt = 0, pb = 0, pl = 0, pr = 0;  // top/bottom/left/right pads
  std::size_t oh = 0, ow = 0;
};

inline void same_pads(std::size_t in, std::size_t k, std::size_t stride, std::size_t& begin,
                      std::size_t& end, std::size_t& out) {
  out = (in + stride - 1) / stride;
  std::size_t span = (out - 1) * stride + k;
  std::size_t total = span > in ? span - in : 0;
  begin = total / 2;
  end = total - begin;
}

inline ConvGeom conv_geom(std::size_t h, std::size_t w, std::size_t kh, std::size_t kw,
                          std::size_t stride, int padding, const char* op) {
  ConvGeom g;
  if (padding == kSamePad) {
    same_pads(h, kh, stride, g.pt, g.pb, g.oh);
    same_pads(w, kw, stride, g.pl, g.pr, g.ow);
  } else {
    if (padding < 0) tensor_fail(std::string(op) + ": negative explicit padding");
    std::size_t p = static_cast<std::size_t>(padding);
    g.pt = g.pb = g.pl = g.pr = p;
    if (h + 2 * p < kh || w + 2 * p < kw)
      tensor_fail(std::string(op) + ": kernel larger than padded input");
    g.oh = (h + 2 * p - kh) / stride + 1;
    g.ow = (w + 2 * p - kw) / stride + 1;
  }
  return g;
}

// zero-padded copy of one [C,H,W] image; returns input pointer when no pad
template <typename T>
inline const T* pad_image(const T* x, std::size_t c, std::size_t h, std::size_t w,
                          const ConvGeom& g, std::vector<T>& buf) {
  if (g.pt == 0 && g.pb == 0 && g.pl == 0 && g.pr == 0) return x;
  std::size_t hp = h + g.pt + g.pb, wp = w + g.pl + g.pr;
  buf.assign(c * hp * wp, T(0));
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t y = 0; y < h; ++y)
      std::copy(x + (ci * h + y) * w, x + (ci * h + y + 1) * w,
                buf.data() + (ci * hp + y + g.pt) * wp + g.pl);
  return buf.data();
}

// cols[(c*kh+ki)*kw+kj][oy*ow+ox] = xp[c][oy*s+ki][ox*s+kj]
template <typename T>
inline void im2col(const T* xp, std::size_t c, std::size_t hp, std::size_t wp, std::size_t kh,
                   std::size_t kw, std::size_t stride, std::size_t oh, std::size_t ow, T* cols) {
  std::size_t spatial = oh * ow;
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t ki = 0; ki < kh; ++ki)
      for (std::size_t kj = 0; kj < kw; ++kj) {
        T* row = cols + ((ci * kh + ki) * kw + kj) * spatial;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const T* src = xp + (ci * hp + oy * stride + ki) * wp + kj;
          T* dst = row + oy * ow;
          for (std::size_t ox = 0; ox < ow; ++ox) dst[ox] = src[ox * stride];
        }
      }
}

// scatter-add of a cols matrix back onto a padded image gradient
template <typename T>
inline void col2im_add(const T* cols, std::size_t c, std::size_t hp, std::size_t wp, std::size_t kh,
                       std::size_t kw, std::size_t stride, std::size_t oh, std::size_t ow, T* gxp) {
  std::size_t spatial = oh * ow;
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t ki = 0; ki < kh; ++ki)
      for (std::size_t kj = 0; kj < kw; ++kj) {
        const T* row = cols + ((ci * kh + ki) * kw + kj) * spatial;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          T* dst = gxp + (ci * hp + oy * stride + ki) * wp + kj;
          const T* src = row + oy * ow;
          for (std::size_t ox = 0; ox < ow; ++ox) dst[ox * stride] += src[ox];
        }
      }
}

// crop-add padded gradient back onto the unpadded input gradient
template <typename T>
inline void unpad_add(const T* gxp, std::size_t c, std::size_t h, std::size_t w, const ConvGeom& g,
                      T* gx) {
  std::size_t hp = h + g.pt + g.pb, wp = w + g.pl + g.pr;
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t y = 0; y < h; ++y) {
      const T* src = gxp + (ci * hp + y + g.pt) * wp + g.pl;
      T* dst = gx + (ci * h + y) * w;
      for (std::size_t x = 0; x < w; ++x) dst[x] += src[x];
    }
}

}  // namespace detail

/// Cross-correlation conv2d: input [B,C,H,W], kernel [O,C,kh,kw], optional
/// bias [O]. Same-padding output size is ceil(in/stride) per spatial dim.
template <typename T>
inline Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& k, const Tensor<T>& bias = Tensor<T>(),
                        std::size_t stride = 1, int padding = kSamePad) {
  if (x.rank() != 4 || k.rank() != 4)
    tensor_fail("conv2d: expects 4D input and kernel, got " + shape_str(x.shape()) + " and " +
                shape_str(k.shape()));
  if (stride < 1) tensor_fail("conv2d: stride must be >= 1");
  std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  std::size_t O = k.dim(0), KC = k.dim(1), KH = k.dim(2), KW = k.dim(3);
  if (KC != C)
    tensor_fail("conv2d: kernel channels mismatch, input " + shape_str(x.shape()) + " vs kernel " +
                shape_str(k.shape()));
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != O))
    tensor_fail("conv2d: bias must be [O], got " + shape_str(bias.shape()));
  auto g = detail::conv_geom(H, W, KH, KW, stride, padding, "conv2d");
  std::size_t spatial = g.oh * g.ow, ckk = C * KH * KW;
  std::size_t hp = H + g.pt + g.pb, wp = W + g.pl + g.pr;
  bool one_by_one = (KH == 1 && KW == 1 && stride == 1 && hp == H && wp == W);

  Tensor<T> out = Tensor<T>::zeros({B, O, g.oh, g.ow});
  {
    const T* px = x.data().data();
    const T* pk = k.data().data();
    T* po = out.data().data();
    std::vector<T> padbuf, cols;
    if (!one_by_one) cols.resize(ckk * spatial);
    for (std::size_t b = 0; b < B; ++b) {
      const T* xb = px + b * C * H * W;
      const T* colp;
      if (one_by_one) {
        colp = xb;
      } else {
        const T* xp = detail::pad_image(xb, C, H, W, g, padbuf);
        detail::im2col(xp, C, hp, wp, KH, KW, stride, g.oh, g.ow, cols.data());
        colp = cols.data();
      }
      detail::gemm_nn(pk, colp, po + b * O * spatial, O, ckk, spatial);
    }
    if (bias.defined()) {
      const T* pb = bias.data().data();
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t o = 0; o < O; ++o) {
          T* row = po + (b * O + o) * spatial;
          for (std::size_t i = 0; i < spatial; ++i) row[i] += pb[o];
        }
    }
  }

  std::vector<Tensor<T>> parents = bias.defined() ? std::vector<Tensor<T>>{x, k, bias}
                                                  : std::vector<Tensor<T>>{x, k};
  attach_tape<T>(out, "conv2d", parents,
                 [x, k, bias, B, C, H, W, O, KH, KW, stride, g, spatial, ckk, hp, wp,
                  one_by_one](TensorNode<T>& self) mutable {
                   const T* gout = self.grad.data();
                   const T* px = x.data().data();
                   const T* pk = k.data().data();
                   std::vector<T> padbuf, cols, gcols, gpad;
                   if (!one_by_one) cols.resize(ckk * spatial);
                   for (std::size_t b = 0; b < B; ++b) {
                     const T* gb = gout + b * O * spatial;
                     const T* xb = px + b * C * H * W;
                     if (k.tracked()) {
                       const T* colp;
                       if (one_by_one) {
                         colp = xb;
                       } else {
                         const T* xp = detail::pad_image(xb, C, H, W, g, padbuf);
                         detail::im2col(xp, C, hp, wp, KH, KW, stride, g.oh, g.ow, cols.data());
                         colp = cols.data();
                       }
                       detail::gemm_nt(gb, colp, k.grad().data(), O, spatial, ckk);
                     }
                     if (x.tracked()) {
                       T* gx = x.grad().data() + b * C * H * W;
                       if (one_by_one) {
                         detail::gemm_tn(pk, gb, gx, O, ckk, spatial);
                       } else {
                         gcols.assign(ckk * spatial, T(0));
                         detail::gemm_tn(pk, gb, gcols.data(), O, ckk, spatial);
                         if (g.pt || g.pb || g.pl || g.pr) {
                           gpad.assign(C * hp * wp, T(0));
                           detail::col2im_add(gcols.data(), C, hp, wp, KH, KW, stride, g.oh, g.ow,
                                              gpad.data());
                           detail::unpad_add(gpad.data(), C, H, W, g, gx);
                         } else {
                           detail::col2im_add(gcols.data(), C, hp, wp, KH, KW, stride, g.oh, g.ow, gx);
                         }
                       }
                     }
                   }
                   if (bias.defined() && bias.tracked()) {
                     T* gbias = bias.grad().data();
                     for (std::size_t b = 0; b < B; ++b)
                       for (std::size_t o = 0; o < O; ++o) {
                         const T* row = gout + (b * O + o) * spatial;
                         T acc = T(0);
                         for (std::size_t i = 0; i < spatial; ++i) acc += row[i];
                         gbias[o] += acc;
                       }
                   }
                 });
  return out;
}

/// One filter per channel: input [B,C,H,W], kernel [C,1,kh,kw].
template <typename T>
inline Tensor<T> depthwise_conv2d(const Tensor<T>& x, const Tensor<T>& k,
                                  const Tensor<T>& bias = Tensor<T>(), std::size_t stride = 1,
                                  int padding = kSamePad) {
  if (x.rank() != 4 || k.rank() != 4)
    tensor_fail("depthwise_conv2d: expects 4D input and kernel");
  std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (k.dim(0) != C || k.dim(1) != 1)
    tensor_fail("depthwise_conv2d: kernel must be [C,1,kh,kw]; input " + shape_str(x.shape()) +
                " vs kernel " + shape_str(k.shape()));
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != C))
    tensor_fail("depthwise_conv2d: bias must be [C]");
  std::size_t KH = k.dim(2), KW = k.dim(3);
  auto g = detail::conv_geom(H, W, KH, KW, stride, padding, "depthwise_conv2d");
  std::size_t hp = H + g.pt + g.pb, wp = W + g.pl + g.pr;

  Tensor<T> out = Tensor<T>::zeros({B, C, g.oh, g.ow});
  {
    const T* px = x.data().data();
    const T* pk = k.data().data();
    const T* pb = bias.defined() ? bias.data().data() : nullptr;
    T* po = out.data().data();
    std::vector<T> padbuf;
    for (std::size_t b = 0; b < B; ++b) {
      const T* xp = detail::pad_image(px + b * C * H * W, C, H, W, g, padbuf);
      for (std::size_t c = 0; c < C; ++c) {
        const T* xc = xp + c * hp * wp;
        const T* kc = pk + c * KH * KW;
        T* oc = po + (b * C + c) * g.oh * g.ow;
        T bv = pb ? pb[c] : T(0);
        for (std::size_t oy = 0; oy < g.oh; ++oy)
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            T acc = bv;
            const T* base = xc + oy * stride * wp + ox * stride;
            for (std::size_t ki = 0; ki < KH; ++ki)
              for (std::size_t kj = 0; kj < KW; ++kj) acc += base[ki * wp + kj] * kc[ki * KW + kj];
            oc[oy * g.ow + ox] = acc;
          }
      }
    }
  }

  std::vector<Tensor<T>> parents = bias.defined() ? std::vector<Tensor<T>>{x, k, bias}
                                                  : std::vector<Tensor<T>>{x, k};
  attach_tape<T>(out, "depthwise_conv2d", parents,
                 [x, k, bias, B, C, H, W, KH, KW, stride, g, hp, wp](TensorNode<T>& self) mutable {
                   const T* gout = self.grad.data();
                   const T* px = x.data().data();
                   const T* pk = k.data().data();
                   std::vector<T> padbuf, gpad;
                   bool padded = g.pt || g.pb || g.pl || g.pr;
                   for (std::size_t b = 0; b < B; ++b) {
                     const T* xp = detail::pad_image(px + b * C * H * W, C, H, W, g, padbuf);
                     if (x.tracked() && padded) gpad.assign(C * hp * wp, T(0));
                     for (std::size_t c = 0; c < C; ++c) {
                       const T* xc = xp + c * hp * wp;
                       const T* kc = pk + c * KH * KW;
                       const T* gc = gout + (b * C + c) * g.oh * g.ow;
                       T* gk = k.tracked() ? k.grad().data() + c * KH * KW : nullptr;
                       T* gxc = nullptr;
                       if (x.tracked())
                         gxc = padded ? gpad.data() + c * hp * wp
                                      : x.grad().data() + (b * C + c) * H * W;
                       for (std::size_t oy = 0; oy < g.oh; ++oy)
                         for (std::size_t ox = 0; ox < g.ow; ++ox) {
                           T gv = gc[oy * g.ow + ox];
                           if (gv == T(0)) continue;
                           std::size_t base = oy * stride * wp + ox * stride;
                           for (std::size_t ki = 0; ki < KH; ++ki)
                             for (std::size_t kj = 0; kj < KW; ++kj) {
                               if (gk) gk[ki * KW + kj] += gv * xc[base + ki * wp + kj];
                               if (gxc) gxc[base + ki * wp + kj] += gv * kc[ki * KW + kj];
                             }
                         }
                     }
                     if (x.tracked() && padded)
                       detail::unpad_add(gpad.data(), C, H, W, g, x.grad().data() + b * C * H * W);
                   }
                   if (bias.defined() && bias.tracked()) {
                     T* gb = bias.grad().data();
                     for (std::size_t b = 0; b < B; ++b)
                       for (std::size_t c = 0; c < C; ++c) {
                         const T* gc = gout + (b * C + c) * g.oh * g.ow;
                         T acc = T(0);
                         for (std::size_t i = 0; i < g.oh * g.ow; ++i) acc += gc[i];
                         gb[c] += acc;
                       }
                   }
                 });
  return out;
}

enum class PoolKind { Max, Avg };

/// Valid-region pooling. Max-pool gradient routes to the first maximal
/// element in scan order; avg-pool distributes uniformly.
template <typename T>
inline Tensor<T> pool2d(const Tensor<T>& x, PoolKind kind, std::size_t window, std::size_t stride) {
  if (x.rank() != 4) tensor_fail("pool2d: expects [B,C,H,W]");
  if (window == 0 || stride == 0) tensor_fail("pool2d: window and stride must be positive");
  std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (window > H || window > W)
    tensor_fail("pool2d: window " + std::to_string(window) + " larger than input " + shape_str(x.shape()));
  std::size_t OH = (H - window) / stride + 1, OW = (W - window) / stride + 1;
  Tensor<T> out = Tensor<T>::zeros({B, C, OH, OW});
  auto argmax = kind == PoolKind::Max ? std::make_shared<std::vector<std::size_t>>(B * C * OH * OW)
                                      : nullptr;
  {
    const T* px = x.data().data();
    T* po = out.data().data();
    T inv = T(1) / static_cast<T>(window * window);
    for (std::size_t bc = 0; bc < B * C; ++bc) {
      const T* xc = px + bc * H * W;
      T* oc = po + bc * OH * OW;
      for (std::size_t oy = 0; oy < OH; ++oy)
        for (std::size_t ox = 0; ox < OW; ++ox) {
          if (kind == PoolKind::Max) {
            std::size_t best = oy * stride * W + ox * stride;
            T bv = xc[best];
            for (std::size_t ki = 0; ki < window; ++ki)
              for (std::size_t kj = 0; kj < window; ++kj) {
                std::size_t idx = (oy * stride + ki) * W + ox * stride + kj;
                if (xc[idx] > bv) {
                  bv = xc[idx];
                  best = idx;
                }
              }
            oc[oy * OW + ox] = bv;
            (*argmax)[bc * OH * OW + oy * OW + ox] = bc * H * W + best;
          } else {
            T acc = T(0);
            for (std::size_t ki = 0; ki < window; ++ki)
              for (std::size_t kj = 0; kj < window; ++kj)
                acc += xc[(oy * stride + ki) * W + ox * stride + kj];
            oc[oy * OW + ox] = acc * inv;
          }
        }
    }
  }
  attach_tape<T>(out, "pool2d", {x},
                 [x, kind, window, stride, B, C, H, W, OH, OW, argmax](TensorNode<T>& self) mutable {
                   auto& gx = x.grad();
                   const auto& g = self.grad;
                   if (kind == PoolKind::Max) {
                     for (std::size_t i = 0; i < g.size(); ++i) gx[(*argmax)[i]] += g[i];
                   } else {
                     T inv = T(1) / static_cast<T>(window * window);
                     for (std::size_t bc = 0; bc < B * C; ++bc)
                       for (std::size_t oy = 0; oy < OH; ++oy)
                         for (std::size_t ox = 0; ox < OW; ++ox) {
                           T gv = g[bc * OH * OW + oy * OW + ox] * inv;
                           for (std::size_t ki = 0; ki < window; ++ki)
                             for (std::size_t kj = 0; kj < window; ++kj)
                               gx[bc * H * W + (oy * stride + ki) * W + ox * stride + kj] += gv;
                         }
                   }
                 });
  return out;
}

/// Whole-map pooling to [B,C,1,1].
template <typename T>
inline Tensor<T> global_pool(const Tensor<T>& x, PoolKind kind) {
  if (x.rank() != 4) tensor_fail("global_pool: expects [B,C,H,W]");
  std::size_t B = x.dim(0), C = x.dim(1), S = x.dim(2) * x.dim(3);
  Tensor<T> out = Tensor<T>::zeros({B, C, 1, 1});
  auto argmax = kind == PoolKind::Max ? std::make_shared<std::vector<std::size_t>>(B * C) : nullptr;
  {
    const T* px = x.data().data();
    T* po = out.data().data();
    for (std::size_t bc = 0; bc < B * C; ++bc) {
      const T* xc = px + bc * S;
      if (kind == PoolKind::Max) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < S; ++i)
          if (xc[i] > xc[best]) best = i;
        po[bc] = xc[best];
        (*argmax)[bc] = bc * S + best;
      } else {
        T acc = T(0);
        for (std::size_t i = 0; i < S; ++i) acc += xc[i];
        po[bc] = acc / static_cast<T>(S);
      }
    }
  }
  attach_tape<T>(out, "global_pool", {x}, [x, kind, S](TensorNode<T>& self) mutable {
    auto& gx = x.grad();
    const auto& g = self.grad;
    if (kind == PoolKind::Max) {
      // argmax recomputed from input: first maximal index in scan order
      const auto& dx = x.data();
      for (std::size_t bc = 0; bc < g.size(); ++bc) {
        std::size_t best = bc * S;
        for (std::size_t i = 1; i < S; ++i)
          if (dx[bc * S + i] > dx[best]) best = bc * S + i;
        gx[best] += g[bc];
      }
    } else {
      T inv = T(1) / static_cast<T>(S);
      for (std::size_t bc = 0; bc < g.size(); ++bc) {
        T gv = g[bc] * inv;
        for (std::size_t i = 0; i < S; ++i) gx[bc * S + i] += gv;
      }
    }
  });
  return out;
}

/// Half-pixel-center bilinear resize with edge clamping; differentiable.
template <typename T>
inline Tensor<T> bilinear_resize(const Tensor<T>& x, std::size_t out_h, std::size_t out_w) {
  if (x.rank() != 4) tensor_fail("bilinear_resize: expects [B,C,H,W]");
  if (out_h == 0 || out_w == 0) tensor_fail("bilinear_resize: output dims must be >= 1");
  std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  double sh = static_cast<double>(H) / static_cast<double>(out_h);
  double sw = static_cast<double>(W) / static_cast<double>(out_w);

  // per-row/col source indices and lerp weights
  std::vector<std::size_t> y0(out_h), y1(out_h), x0(out_w), x1(out_w);
  std::vector<T> wy(out_h), wx(out_w);
  for (std::size_t oy = 0; oy < out_h; ++oy) {
    double src = (static_cast<double>(oy) + 0.5) * sh - 0.5;
    src = std::min(std::max(src, 0.0), static_cast<double>(H - 1));
    y0[oy] = static_cast<std::size_t>(src);
    y1[oy] = std::min(y0[oy] + 1, H - 1);
    wy[oy] = static_cast<T>(src - static_cast<double>(y0[oy]));
  }
  for (std::size_t ox = 0; ox < out_w; ++ox) {
    double src = (static_cast<double>(ox) + 0.5) * sw - 0.5;
    src = std::min(std::max(src, 0.0), static_cast<double>(W - 1));
    x0[ox] = static_cast<std::size_t>(src);
    x1[ox] = std::min(x0[ox] + 1, W - 1);
    wx[ox] = static_cast<T>(src - static_cast<double>(x0[ox]));
  }

  Tensor<T> out = Tensor<T>::zeros({B, C, out_h, out_w});
  {
    const T* px = x.data().data();
    T* po = out.data().data();
    for (std::size_t bc = 0; bc < B * C; ++bc) {
      const T* xc = px + bc * H * W;
      T* oc = po + bc * out_h * out_w;
      for (std::size_t oy = 0; oy < out_h; ++oy)
        for (std::size_t ox = 0; ox < out_w; ++ox) {
          T a = xc[y0[oy] * W + x0[ox]], b = xc[y0[oy] * W + x1[ox]];
          T c = xc[y1[oy] * W + x0[ox]], d = xc[y1[oy] * W + x1[ox]];
          T top = a + (b - a) * wx[ox];
          T bot = c + (d - c) * wx[ox];
          oc[oy * out_w + ox] = top + (bot - top) * wy[oy];
        }
    }
  }
  attach_tape<T>(out, "bilinear_resize", {x},
                 [x, B, C, H, W, out_h, out_w, y0, y1, x0, x1, wy, wx](TensorNode<T>& self) mutable {
                   auto& gx = x.grad();
                   const auto& g = self.grad;
                   for (std::size_t bc = 0; bc < B * C; ++bc) {
                     T* gc = gx.data() + bc * H * W;
                     const T* go = g.data() + bc * out_h * out_w;
                     for (std::size_t oy = 0; oy < out_h; ++oy)
                       for (std::size_t ox = 0; ox < out_w; ++ox) {
                         T gv = go[oy * out_w + ox];
                         if (gv == T(0)) continue;
                         T fy = wy[oy], fx = wx[ox];
                         gc[y0[oy] * W + x0[ox]] += gv * (T(1) - fy) * (T(1) - fx);
                         gc[y0[oy] * W + x1[ox]] += gv * (T(1) - fy) * fx;
                         gc[y1[oy] * W + x0[ox]] += gv * fy * (T(1) - fx);
                         gc[y1[oy] * W + x1[ox]] += gv * fy * fx;
                       }
                   }
                 });
  return out;
}

/// Zero padding on the spatial dims of [B,C,H,W].
template <typename T>
inline Tensor<T> pad2d(const Tensor<T>& x, std::size_t top, std::size_t bottom, std::size_t left,
                       std::size_t right) {
  if (x.rank() != 4) tensor_fail("pad2d: expects [B,C,H,W]");
  if (top == 0 && bottom == 0 && left == 0 && right == 0) return x;
  std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  std::size_t HP = H + top + bottom, WP = W + left + right;
  Tensor<T> out = Tensor<T>::zeros({B, C, HP, WP});
  {
    const T* px = x.data().data();
    T* po = out.data().data();
    for (std::size_t bc = 0; bc < B * C; ++bc)
      for (std::size_t y = 0; y < H; ++y)
        std::copy(px + (bc * H + y) * W, px + (bc * H + y + 1) * W,
                  po + (bc * HP + y + top) * WP + left);
  }
  attach_tape<T>(out, "pad2d", {x}, [x, B, C, H, W, HP, WP, top, left](TensorNode<T>& self) mutable {
    auto& gx = x.grad();
    const auto& g = self.grad;
    for (std::size_t bc = 0; bc < B * C; ++bc)
      for (std::size_t y = 0; y < H; ++y) {
        const T* src = g.data() + (bc * HP + y + top) * WP + left;
        T* dst = gx.data() + (bc * H + y) * W;
        for (std::size_t xw = 0; xw < W; ++xw) dst[xw] += src[xw];
      }
  });
  return out;
}

}  // namespace lungx
