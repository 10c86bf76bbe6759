#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "lungx/rng.hpp"

namespace lungx {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

[[noreturn]] inline void tensor_fail(const std::string& msg) { throw std::invalid_argument(msg); }

inline void check_shape_valid(const Shape& s) {
  for (std::size_t d : s)
    if (d == 0) tensor_fail("tensor shape has a zero extent: " + shape_str(s));
}

// Thread-local gradient-recording switch. Forward values are always
// computed; tape nodes are only attached while this is on.
inline bool& grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}

struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(grad_mode()) { grad_mode() = false; }
  ~NoGradGuard() { grad_mode() = prev; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

template <typename T>
struct TensorNode;

// One reverse-mode tape entry: primitive id, parent links, and the backward
// rule. Saved context (shapes, masks, argmax indices, ...) lives in the
// closure. The tape is acyclic by construction: parents always point at
// tensors created earlier.
template <typename T>
struct TapeNode {
  const char* op = "";
  std::vector<std::shared_ptr<TensorNode<T>>> parents;
  std::function<void(TensorNode<T>&)> backward;
};

template <typename T>
struct TensorNode {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until first accumulation; then matches data length
  bool track = false;
  std::unique_ptr<TapeNode<T>> tape;

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
  }
};

/// Dense n-dimensional tensor with reverse-mode autodiff, shared-handle
/// semantics (copies alias the same storage and tape node).
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  static Tensor zeros(Shape shape, bool track = false) {
    return filled(std::move(shape), T(0), track);
  }

  static Tensor full(Shape shape, T value, bool track = false) {
    return filled(std::move(shape), value, track);
  }

  static Tensor from(std::vector<T> values, Shape shape, bool track = false) {
    check_shape_valid(shape);
    if (values.size() != shape_numel(shape))
      tensor_fail("tensor data length " + std::to_string(values.size()) +
                  " does not match shape " + shape_str(shape));
    Tensor t;
    t.node_ = std::make_shared<TensorNode<T>>();
    t.node_->shape = std::move(shape);
    t.node_->data = std::move(values);
    t.node_->track = track;
    return t;
  }

  static Tensor scalar(T value, bool track = false) { return from({value}, {1}, track); }

  static Tensor randn(Shape shape, Rng& rng, T stddev = T(1), T mean = T(0), bool track = false) {
    check_shape_valid(shape);
    std::vector<T> v(shape_numel(shape));
    for (auto& x : v) x = static_cast<T>(rng.normal(static_cast<double>(mean), static_cast<double>(stddev)));
    return from(std::move(v), std::move(shape), track);
  }

  // He-normal init for a weight with the given fan-in
  static Tensor he(Shape shape, std::size_t fan_in, Rng& rng, bool track = true) {
    return randn(std::move(shape), rng, static_cast<T>(std::sqrt(2.0 / static_cast<double>(fan_in))), T(0), track);
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t numel() const { return node_->data.size(); }

  // Handle semantics: a const Tensor is a const handle to shared, mutable
  // storage, like shared_ptr. Methods below mutate the node, not the handle.
  std::vector<T>& data() const { return node_->data; }

  bool tracked() const { return node_ && node_->track; }
  const Tensor& set_track(bool on) const {
    node_->track = on;
    return *this;
  }

  // gradient buffer; allocated zero-filled on first access
  std::vector<T>& grad() const {
    node_->ensure_grad();
    return node_->grad;
  }
  bool has_grad() const { return !node_->grad.empty(); }
  void zero_grad() const {
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), T(0));
  }

  T item() const {
    if (numel() != 1) tensor_fail("item() on non-scalar tensor of shape " + shape_str(shape()));
    return node_->data[0];
  }

  T at(std::initializer_list<std::size_t> idx) const {
    if (idx.size() != rank()) tensor_fail("at(): index rank mismatch");
    std::size_t flat = 0, i = 0;
    for (std::size_t v : idx) {
      flat = flat * node_->shape[i] + v;
      ++i;
    }
    return node_->data[flat];
  }

  // untracked copy of the values (detached from the tape)
  Tensor detach() const { return from(node_->data, node_->shape, false); }

  std::shared_ptr<TensorNode<T>>& node() { return node_; }
  const std::shared_ptr<TensorNode<T>>& node() const { return node_; }

 private:
  static Tensor filled(Shape shape, T value, bool track) {
    check_shape_valid(shape);
    Tensor t;
    t.node_ = std::make_shared<TensorNode<T>>();
    std::size_t n = shape_numel(shape);
    t.node_->shape = std::move(shape);
    t.node_->data.assign(n, value);
    t.node_->track = track;
    return t;
  }

  std::shared_ptr<TensorNode<T>> node_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

// ordered parameter/state registries used by the model modules and the
// checkpoint/optimizer plumbing
template <typename T>
using NamedParams = std::vector<std::pair<std::string, Tensor<T>>>;
template <typename T>
using NamedBuffers = std::vector<std::pair<std::string, std::vector<T>*>>;

// Attach a tape node to `out` when recording is on and any parent tracks.
template <typename T>
inline void attach_tape(Tensor<T>& out, const char* op, std::vector<Tensor<T>> parents,
                        std::function<void(TensorNode<T>&)> backward) {
  if (!grad_mode()) return;
  bool track = false;
  for (const auto& p : parents) track = track || p.tracked();
  if (!track) return;
  auto tape = std::make_unique<TapeNode<T>>();
  tape->op = op;
  tape->parents.reserve(parents.size());
  for (auto& p : parents) tape->parents.push_back(p.node());
  tape->backward = std::move(backward);
  out.node()->track = true;
  out.node()->tape = std::move(tape);
}

/// Reverse-mode sweep from a scalar loss. Gradients accumulate additively
/// across fan-out; untracked tensors are untouched.
template <typename T>
inline void backward(Tensor<T>& loss) {
  if (loss.numel() != 1) tensor_fail("backward: loss must be a scalar, got shape " + shape_str(loss.shape()));
  if (!loss.tracked()) tensor_fail("backward: loss does not track gradients");

  // iterative post-order DFS; reverse of it is a valid reverse-topological order
  std::vector<TensorNode<T>*> order;
  std::unordered_set<TensorNode<T>*> seen;
  struct Frame {
    TensorNode<T>* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({loss.node().get(), 0});
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    std::size_t nparents = f.node->tape ? f.node->tape->parents.size() : 0;
    if (f.next_parent < nparents) {
      TensorNode<T>* p = f.node->tape->parents[f.next_parent++].get();
      if (p->track && !seen.count(p)) {
        seen.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  loss.grad();  // allocate
  loss.node()->grad[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode<T>* n = *it;
    if (n->tape && n->tape->backward) {
      n->ensure_grad();
      n->tape->backward(*n);
    }
  }
}

// ---------------------------------------------------------------------------
// broadcasting machinery (trailing-aligned, extent 1 broadcasts)
// ---------------------------------------------------------------------------

namespace detail {

inline Shape pad_rank(const Shape& s, std::size_t r) {
  Shape p(r, 1);
  std::copy(s.begin(), s.end(), p.begin() + static_cast<std::ptrdiff_t>(r - s.size()));
  return p;
}

struct Bcast {
  Shape out;
  std::vector<std::size_t> sa, sb;  // per-dim element strides, 0 on broadcast dims
  std::size_t n = 1;
};

inline Bcast make_bcast(const Shape& a, const Shape& b, const char* op) {
  std::size_t r = std::max(a.size(), b.size());
  Shape pa = pad_rank(a, r), pb = pad_rank(b, r);
  Bcast bc;
  bc.out.resize(r);
  for (std::size_t i = 0; i < r; ++i) {
    if (pa[i] == pb[i])
      bc.out[i] = pa[i];
    else if (pa[i] == 1)
      bc.out[i] = pb[i];
    else if (pb[i] == 1)
      bc.out[i] = pa[i];
    else
      tensor_fail(std::string(op) + ": shapes " + shape_str(a) + " and " + shape_str(b) +
                  " are not broadcast-compatible");
  }
  bc.sa.assign(r, 0);
  bc.sb.assign(r, 0);
  std::size_t stra = 1, strb = 1;
  for (std::size_t i = r; i-- > 0;) {
    bc.sa[i] = (pa[i] == 1 && bc.out[i] > 1) ? 0 : stra;
    bc.sb[i] = (pb[i] == 1 && bc.out[i] > 1) ? 0 : strb;
    stra *= pa[i];
    strb *= pb[i];
  }
  bc.n = shape_numel(bc.out);
  return bc;
}

// Walk the broadcast output space once; fn(out_flat, a_flat, b_flat).
template <typename Fn>
inline void for_each_bcast(const Bcast& bc, Fn&& fn) {
  std::size_t r = bc.out.size();
  if (r == 0) {
    fn(0, 0, 0);
    return;
  }
  std::vector<std::size_t> idx(r, 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t o = 0; o < bc.n; ++o) {
    fn(o, ia, ib);
    for (std::size_t d = r; d-- > 0;) {
      ++idx[d];
      ia += bc.sa[d];
      ib += bc.sb[d];
      if (idx[d] < bc.out[d]) break;
      idx[d] = 0;
      ia -= bc.sa[d] * bc.out[d];
      ib -= bc.sb[d] * bc.out[d];
    }
  }
}

inline std::vector<std::size_t> strides_of(const Shape& s) {
  std::vector<std::size_t> st(s.size(), 1);
  for (std::size_t i = s.size(); i-- > 1;) st[i - 1] = st[i] * s[i];
  return st;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise arithmetic
// ---------------------------------------------------------------------------

template <typename T>
inline Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() == b.shape()) {
    std::vector<T> v(a.numel());
    const auto& da = a.data();
    const auto& db = b.data();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = da[i] + db[i];
    Tensor<T> out = Tensor<T>::from(std::move(v), a.shape());
    attach_tape<T>(out, "add", {a, b}, [a, b](TensorNode<T>& self) mutable {
      if (a.tracked()) {
        auto& g = a.grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      }
      if (b.tracked()) {
        auto& g = b.grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      }
    });
    return out;
  }
  auto bc = detail::make_bcast(a.shape(), b.shape(), "add");
  std::vector<T> v(bc.n);
  {
    const auto& da = a.data();
    const auto& db = b.data();
    detail::for_each_bcast(bc, [&](std::size_t o, std::size_t ia, std::size_t ib) { v[o] = da[ia] + db[ib]; });
  }
  Tensor<T> out = Tensor<T>::from(std::move(v), bc.out);
  attach_tape<T>(out, "add", {a, b}, [a, b, bc](TensorNode<T>& self) mutable {
    const auto& g = self.grad;
    if (a.tracked()) {
      auto& ga = a.grad();
      detail::for_each_bcast(bc, [&](std::size_t o, std::size_t ia, std::size_t) { ga[ia] += g[o]; });
    }
    if (b.tracked()) {
      auto& gb = b.grad();
      detail::for_each_bcast(bc, [&](std::size_t o, std::size_t, std::size_t ib) { gb[ib] += g[o]; });
    }
  });
  return out;
}

template <typename T>
inline Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() == b.shape()) {
    std::vector<T> v(a.numel());
    const auto& da = a.data();
    const auto& db = b.data();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = da[i] * db[i];
    Tensor<T> out = Tensor<T>::from(std::move(v), a.shape());
    attach_tape<T>(out, "mul", {a, b}, [a, b](TensorNode<T>& self) mutable {
      const auto& g = self.grad;
      if (a.tracked()) {
        auto& ga = a.grad();
        const auto& db2 = b.data();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * db2[i];
      }
      if (b.tracked()) {
        auto& gb = b.grad();
        const auto& da2 = a.data();
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * da2[i];
      }
    });
    return out;
  }
  auto bc = detail::make_bcast(a.shape(), b.shape(), "mul");
  std::vector<T> v(bc.n);
  {
    const auto& da = a.data();
    const auto& db = b.data();
    detail::for_each_bcast(bc, [&](std::size_t o, std::size_t ia, std::size_t ib) { v[o] = da[ia] * db[ib]; });
  }
  Tensor<T> out = Tensor<T>::from(std::move(v), bc.out);
  attach_tape<T>(out, "mul", {a, b}, [a, b, bc](TensorNode<T>& self) mutable {
    const auto& g = self.grad;
    const auto& da = a.data();
    const auto& db = b.data();
    if (a.tracked()) {
      auto& ga = a.grad();
      detail::for_each_bcast(bc, [&](std::size_t o, std::size_t ia, std::size_t ib) { ga[ia] += g[o] * db[ib]; });
    }
    if (b.tracked()) {
      auto& gb = b.grad();
      detail::for_each_bcast(bc, [&](std::size_t o, std::size_t ia, std::size_t ib) { gb[ib] += g[o] * da[ia]; });
    }
  });
  return out;
}

template <typename T>
inline Tensor<T> neg(const Tensor<T>& a) {
  std::vector<T> v(a.numel());
  const auto& da = a.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = -da[i];
  Tensor<T> out = Tensor<T>::from(std::move(v), a.shape());
  attach_tape<T>(out, "neg", {a}, [a](TensorNode<T>& self) mutable {
    auto& ga = a.grad();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] -= self.grad[i];
  });
  return out;
}

template <typename T>
inline Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return add(a, neg(b));
}

template <typename T>
inline Tensor<T> scale(const Tensor<T>& a, T c) {
  std::vector<T> v(a.numel());
  const auto& da = a.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = da[i] * c;
  Tensor<T> out = Tensor<T>::from(std::move(v), a.shape());
  attach_tape<T>(out, "scale", {a}, [a, c](TensorNode<T>& self) mutable {
    auto& ga = a.grad();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i] * c;
  });
  return out;
}

template <typename T>
inline Tensor<T> add_scalar(const Tensor<T>& a, T c) {
  std::vector<T> v(a.numel());
  const auto& da = a.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = da[i] + c;
  Tensor<T> out = Tensor<T>::from(std::move(v), a.shape());
  attach_tape<T>(out, "add_scalar", {a}, [a](TensorNode<T>& self) mutable {
    auto& ga = a.grad();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
  });
  return out;
}

// ---------------------------------------------------------------------------
// dense linear algebra
// ---------------------------------------------------------------------------

namespace detail {

// C[M,N] += A[M,K] * B[K,N], all row-major
template <typename T>
inline void gemm_nn(const T* A, const T* B, T* C, std::size_t M, std::size_t K, std::size_t N) {
  for (std::size_t i = 0; i < M; ++i) {
    const T* arow = A + i * K;
    T* crow = C + i * N;
    for (std::size_t k = 0; k < K; ++k) {
      T a = arow[k];
      if (a == T(0)) continue;
      const T* brow = B + k * N;
      for (std::size_t j = 0; j < N; ++j) crow[j] += a * brow[j];
    }
  }
}

// C[M,N] += A[M,K] * B^T where B is [N,K]
template <typename T>
inline void gemm_nt(const T* A, const T* B, T* C, std::size_t M, std::size_t K, std::size_t N) {
  for (std::size_t i = 0; i < M; ++i) {
    const T* arow = A + i * K;
    T* crow = C + i * N;
    for (std::size_t j = 0; j < N; ++j) {
      const T* brow = B + j * K;
      T acc = T(0);
      for (std::size_t k = 0; k < K; ++k) acc += arow[k] * brow[k];
      crow[j] += acc;
    }
  }
}

// C[K,N] += A^T * B where A is [M,K], B is [M,N]
template <typename T>
inline void gemm_tn(const T* A, const T* B, T* C, std::size_t M, std::size_t K, std::size_t N) {
  for (std::size_t i = 0; i < M; ++i) {
    const T* arow = A + i * K;
    const T* brow = B + i * N;
    for (std::size_t k = 0; k < K; ++k) {
      T a = arow[k];
      if (a == T(0)) continue;
      T* crow = C + k * N;
      for (std::size_t j = 0; j < N; ++j) crow[j] += a * brow[j];
    }
  }
}

}  // namespace detail

/// matmul for 2D [M,K]x[K,N] or batched 3D [G,M,K]x[G,K,N]
template <typename T>
inline Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != b.rank() || (a.rank() != 2 && a.rank() != 3))
    tensor_fail("matmul: expects two 2D or two 3D tensors, got " + shape_str(a.shape()) + " and " +
                shape_str(b.shape()));
  std::size_t G = a.rank() == 3 ? a.dim(0) : 1;
  std::size_t M = a.dim(a.rank() - 2), K = a.dim(a.rank() - 1);
  std::size_t Kb = b.dim(b.rank() - 2), N = b.dim(b.rank() - 1);
  if (K != Kb || (a.rank() == 3 && b.dim(0) != G))
    tensor_fail("matmul: inner-dimension mismatch between " + shape_str(a.shape()) + " and " +
                shape_str(b.shape()));
  Shape os = a.rank() == 3 ? Shape{G, M, N} : Shape{M, N};
  Tensor<T> out = Tensor<T>::zeros(os);
  {
    const T* pa = a.data().data();
    const T* pb = b.data().data();
    T* pc = out.data().data();
    for (std::size_t g = 0; g < G; ++g)
      detail::gemm_nn(pa + g * M * K, pb + g * K * N, pc + g * M * N, M, K, N);
  }
  attach_tape<T>(out, "matmul", {a, b}, [a, b, G, M, K, N](TensorNode<T>& self) mutable {
    const T* g = self.grad.data();
    if (a.tracked()) {
      T* ga = a.grad().data();
      const T* pb = b.data().data();
      for (std::size_t i = 0; i < G; ++i)
        detail::gemm_nt(g + i * M * N, pb + i * K * N, ga + i * M * K, M, N, K);
    }
    if (b.tracked()) {
      T* gb = b.grad().data();
      const T* pa = a.data().data();
      for (std::size_t i = 0; i < G; ++i)
        detail::gemm_tn(pa + i * M * K, g + i * M * N, gb + i * K * N, M, K, N);
    }
  });
  return out;
}

/// x[..., K] * W^T + b with W[O, K]; keeps leading dims
template <typename T>
inline Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b = Tensor<T>()) {
  if (w.rank() != 2) tensor_fail("linear: weight must be 2D [out,in], got " + shape_str(w.shape()));
  std::size_t K = x.dim(x.rank() - 1);
  std::size_t O = w.dim(0);
  if (w.dim(1) != K)
    tensor_fail("linear: input " + shape_str(x.shape()) + " incompatible with weight " + shape_str(w.shape()));
  if (b.defined() && (b.rank() != 1 || b.dim(0) != O))
    tensor_fail("linear: bias must be [out], got " + shape_str(b.shape()));
  std::size_t R = x.numel() / K;
  Shape os = x.shape();
  os.back() = O;
  Tensor<T> out = Tensor<T>::zeros(os);
  {
    T* pc = out.data().data();
    detail::gemm_nt(x.data().data(), w.data().data(), pc, R, K, O);
    if (b.defined()) {
      const T* pb = b.data().data();
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t o = 0; o < O; ++o) pc[r * O + o] += pb[o];
    }
  }
  std::vector<Tensor<T>> parents = b.defined() ? std::vector<Tensor<T>>{x, w, b} : std::vector<Tensor<T>>{x, w};
  attach_tape<T>(out, "linear", parents, [x, w, b, R, K, O](TensorNode<T>& self) mutable {
    const T* g = self.grad.data();
    if (x.tracked()) detail::gemm_nn(g, w.data().data(), x.grad().data(), R, O, K);
    if (w.tracked()) detail::gemm_tn(g, x.data().data(), w.grad().data(), R, O, K);
    if (b.defined() && b.tracked()) {
      T* gb = b.grad().data();
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t o = 0; o < O; ++o) gb[o] += g[r * O + o];
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// structural ops
// ---------------------------------------------------------------------------

template <typename T>
inline Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  check_shape_valid(shape);
  if (shape_numel(shape) != x.numel())
    tensor_fail("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  Tensor<T> out = Tensor<T>::from(x.data(), std::move(shape));
  attach_tape<T>(out, "reshape", {x}, [x](TensorNode<T>& self) mutable {
    auto& g = x.grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
  return out;
}

template <typename T>
inline Tensor<T> permute(const Tensor<T>& x, const std::vector<std::size_t>& perm) {
  std::size_t r = x.rank();
  if (perm.size() != r) tensor_fail("permute: axis list rank mismatch");
  std::vector<bool> used(r, false);
  Shape os(r);
  for (std::size_t i = 0; i < r; ++i) {
    if (perm[i] >= r || used[perm[i]]) tensor_fail("permute: invalid axis permutation");
    used[perm[i]] = true;
    os[i] = x.dim(perm[i]);
  }
  auto istr = detail::strides_of(x.shape());
  auto ostr = detail::strides_of(os);
  std::size_t n = x.numel();
  std::vector<T> v(n);
  const auto& dx = x.data();
  // walk output linearly, map each output index to its input index
  {
    std::vector<std::size_t> idx(r, 0);
    std::size_t iflat = 0;
    std::vector<std::size_t> step(r);
    for (std::size_t d = 0; d < r; ++d) step[d] = istr[perm[d]];
    for (std::size_t o = 0; o < n; ++o) {
      v[o] = dx[iflat];
      for (std::size_t d = r; d-- > 0;) {
        ++idx[d];
        iflat += step[d];
        if (idx[d] < os[d]) break;
        idx[d] = 0;
        iflat -= step[d] * os[d];
      }
    }
  }
  Tensor<T> out = Tensor<T>::from(std::move(v), os);
  attach_tape<T>(out, "permute", {x}, [x, os, perm, istr](TensorNode<T>& self) mutable {
    auto& gx = x.grad();
    std::size_t r2 = os.size();
    std::vector<std::size_t> idx(r2, 0), step(r2);
    for (std::size_t d = 0; d < r2; ++d) step[d] = istr[perm[d]];
    std::size_t iflat = 0;
    for (std::size_t o = 0; o < self.grad.size(); ++o) {
      gx[iflat] += self.grad[o];
      for (std::size_t d = r2; d-- > 0;) {
        ++idx[d];
        iflat += step[d];
        if (idx[d] < os[d]) break;
        idx[d] = 0;
        iflat -= step[d] * os[d];
      }
    }
  });
  return out;
}

template <typename T>
inline Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis) {
  if (parts.empty()) tensor_fail("concat: no inputs");
  std::size_t r = parts[0].rank();
  if (axis >= r) tensor_fail("concat: axis out of range");
  Shape os = parts[0].shape();
  std::size_t axis_total = 0;
  for (const auto& p : parts) {
    if (p.rank() != r) tensor_fail("concat: rank mismatch");
    for (std::size_t d = 0; d < r; ++d)
      if (d != axis && p.dim(d) != os[d])
        tensor_fail("concat: shape mismatch " + shape_str(p.shape()) + " vs " + shape_str(parts[0].shape()));
    axis_total += p.dim(axis);
  }
  os[axis] = axis_total;
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= os[d];
  for (std::size_t d = axis + 1; d < r; ++d) inner *= os[d];
  Tensor<T> out = Tensor<T>::zeros(os);
  {
    T* po = out.data().data();
    std::size_t offset = 0;
    for (const auto& p : parts) {
      std::size_t len = p.dim(axis) * inner;
      const T* pp = p.data().data();
      for (std::size_t o = 0; o < outer; ++o)
        std::copy(pp + o * len, pp + (o + 1) * len, po + o * axis_total * inner + offset);
      offset += len;
    }
  }
  attach_tape<T>(out, "concat", parts, [parts, outer, inner, axis_total, axis](TensorNode<T>& self) mutable {
    const T* g = self.grad.data();
    std::size_t offset = 0;
    for (auto& p : parts) {
      std::size_t len = p.dim(axis) * inner;
      if (p.tracked()) {
        T* gp = p.grad().data();
        for (std::size_t o = 0; o < outer; ++o) {
          const T* src = g + o * axis_total * inner + offset;
          T* dst = gp + o * len;
          for (std::size_t i = 0; i < len; ++i) dst[i] += src[i];
        }
      }
      offset += len;
    }
  });
  return out;
}

template <typename T>
inline Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t start, std::size_t len) {
  std::size_t r = x.rank();
  if (axis >= r) tensor_fail("slice: axis out of range");
  if (start + len > x.dim(axis) || len == 0) tensor_fail("slice: range out of bounds");
  Shape os = x.shape();
  os[axis] = len;
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= os[d];
  for (std::size_t d = axis + 1; d < r; ++d) inner *= os[d];
  std::size_t ax = x.dim(axis);
  Tensor<T> out = Tensor<T>::zeros(os);
  {
    T* po = out.data().data();
    const T* px = x.data().data();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy(px + (o * ax + start) * inner, px + (o * ax + start + len) * inner, po + o * len * inner);
  }
  attach_tape<T>(out, "slice", {x}, [x, outer, inner, ax, start, len](TensorNode<T>& self) mutable {
    T* gx = x.grad().data();
    const T* g = self.grad.data();
    for (std::size_t o = 0; o < outer; ++o) {
      const T* src = g + o * len * inner;
      T* dst = gx + (o * ax + start) * inner;
      for (std::size_t i = 0; i < len * inner; ++i) dst[i] += src[i];
    }
  });
  return out;
}

// tile a leading-1 tensor along axis 0 (class-token broadcast)
template <typename T>
inline Tensor<T> repeat_axis0(const Tensor<T>& x, std::size_t count) {
  if (x.dim(0) != 1) tensor_fail("repeat_axis0: leading extent must be 1, got " + shape_str(x.shape()));
  Shape os = x.shape();
  os[0] = count;
  std::size_t len = x.numel();
  std::vector<T> v(len * count);
  for (std::size_t c = 0; c < count; ++c)
    std::copy(x.data().begin(), x.data().end(), v.begin() + static_cast<std::ptrdiff_t>(c * len));
  Tensor<T> out = Tensor<T>::from(std::move(v), os);
  attach_tape<T>(out, "repeat_axis0", {x}, [x, count, len](TensorNode<T>& self) mutable {
    auto& gx = x.grad();
    for (std::size_t c = 0; c < count; ++c)
      for (std::size_t i = 0; i < len; ++i) gx[i] += self.grad[c * len + i];
  });
  return out;
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

template <typename T>
inline Tensor<T> sum_all(const Tensor<T>& x) {
  T acc = T(0);
  for (T v : x.data()) acc += v;
  Tensor<T> out = Tensor<T>::scalar(acc);
  attach_tape<T>(out, "sum_all", {x}, [x](TensorNode<T>& self) mutable {
    T g = self.grad[0];
    auto& gx = x.grad();
    for (auto& v : gx) v += g;
  });
  return out;
}

template <typename T>
inline Tensor<T> mean_all(const Tensor<T>& x) {
  return scale(sum_all(x), T(1) / static_cast<T>(x.numel()));
}

template <typename T>
inline Tensor<T> reduce_mean(const Tensor<T>& x, std::size_t axis, bool keepdim = true) {
  if (axis >= x.rank()) tensor_fail("reduce_mean: axis out of range");
  std::size_t outer = 1, inner = 1, ax = x.dim(axis);
  for (std::size_t d = 0; d < axis; ++d) outer *= x.dim(d);
  for (std::size_t d = axis + 1; d < x.rank(); ++d) inner *= x.dim(d);
  Shape os = x.shape();
  if (keepdim)
    os[axis] = 1;
  else
    os.erase(os.begin() + static_cast<std::ptrdiff_t>(axis));
  if (os.empty()) os = {1};
  std::vector<T> v(outer * inner, T(0));
  const auto& dx = x.data();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t a = 0; a < ax; ++a)
      for (std::size_t i = 0; i < inner; ++i) v[o * inner + i] += dx[(o * ax + a) * inner + i];
  T invn = T(1) / static_cast<T>(ax);
  for (auto& e : v) e *= invn;
  Tensor<T> out = Tensor<T>::from(std::move(v), os);
  attach_tape<T>(out, "reduce_mean", {x}, [x, outer, inner, ax, invn](TensorNode<T>& self) mutable {
    auto& gx = x.grad();
    const auto& g = self.grad;
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t a = 0; a < ax; ++a)
        for (std::size_t i = 0; i < inner; ++i) gx[(o * ax + a) * inner + i] += g[o * inner + i] * invn;
  });
  return out;
}

/// max over one axis; gradient routes to the first maximal index in scan order
template <typename T>
inline Tensor<T> reduce_max(const Tensor<T>& x, std::size_t axis, bool keepdim = true) {
  if (axis >= x.rank()) tensor_fail("reduce_max: axis out of range");
  std::size_t outer = 1, inner = 1, ax = x.dim(axis);
  for (std::size_t d = 0; d < axis; ++d) outer *= x.dim(d);
  for (std::size_t d = axis + 1; d < x.rank(); ++d) inner *= x.dim(d);
  Shape os = x.shape();
  if (keepdim)
    os[axis] = 1;
  else
    os.erase(os.begin() + static_cast<std::ptrdiff_t>(axis));
  if (os.empty()) os = {1};
  std::vector<T> v(outer * inner);
  auto argmax = std::make_shared<std::vector<std::size_t>>(outer * inner);
  const auto& dx = x.data();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t i = 0; i < inner; ++i) {
      std::size_t best = (o * ax) * inner + i;
      T bv = dx[best];
      for (std::size_t a = 1; a < ax; ++a) {
        std::size_t idx = (o * ax + a) * inner + i;
        if (dx[idx] > bv) {
          bv = dx[idx];
          best = idx;
        }
      }
      v[o * inner + i] = bv;
      (*argmax)[o * inner + i] = best;
    }
  Tensor<T> out = Tensor<T>::from(std::move(v), os);
  attach_tape<T>(out, "reduce_max", {x}, [x, argmax](TensorNode<T>& self) mutable {
    auto& gx = x.grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) gx[(*argmax)[i]] += self.grad[i];
  });
  return out;
}

// ---------------------------------------------------------------------------
// pointwise nonlinearities
// ---------------------------------------------------------------------------

namespace detail {

// strictly inside (0,1) even where the exact value would round to 0 or 1
template <typename T>
inline T sigmoid_val(T x) {
  T y;
  if (x >= T(0)) {
    T e = std::exp(-x);
    y = T(1) / (T(1) + e);
  } else {
    T e = std::exp(x);
    y = e / (T(1) + e);
  }
  constexpr T lo = std::numeric_limits<T>::min();
  constexpr T hi = T(1) - std::numeric_limits<T>::epsilon() / T(2);
  return std::min(std::max(y, lo), hi);
}

template <typename T>
inline T norm_cdf(T x) {
  return T(0.5) * (T(1) + std::erf(x * T(0.70710678118654752440)));
}

template <typename T>
inline T norm_pdf(T x) {
  return T(0.39894228040143267794) * std::exp(T(-0.5) * x * x);
}

}  // namespace detail

template <typename T>
inline Tensor<T> relu(const Tensor<T>& x) {
  std::vector<T> v(x.numel());
  const auto& dx = x.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = dx[i] > T(0) ? dx[i] : T(0);
  Tensor<T> out = Tensor<T>::from(std::move(v), x.shape());
  attach_tape<T>(out, "relu", {x}, [x](TensorNode<T>& self) mutable {
    auto& gx = x.grad();
    const auto& dx2 = x.data();
    for (std::size_t i = 0; i < gx.size(); ++i)
      if (dx2[i] > T(0)) gx[i] += self.grad[i];
  });
  return out;
}

template <typename T>
inline Tensor<T> sigmoid(const Tensor<T>& x) {
  std::vector<T> v(x.numel());
  const auto& dx = x.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = detail::sigmoid_val(dx[i]);
  Tensor<T> out = Tensor<T>::from(std::move(v), x.shape());
  attach_tape<T>(out, "sigmoid", {x}, [x](TensorNode<T>& self) mutable {
    auto& gx = x.grad();
    const auto& y = self.data;
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i] * y[i] * (T(1) - y[i]);
  });
  return out;
}

/// exact Gaussian-CDF GELU: x * Phi(x)
template <typename T>
inline Tensor<T> gelu(const Tensor<T>& x) {
  std::vector<T> v(x.numel());
  const auto& dx = x.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = dx[i] * detail::norm_cdf(dx[i]);
  Tensor<T> out = Tensor<T>::from(std::move(v), x.shape());
  attach_tape<T>(out, "gelu", {x}, [x](TensorNode<T>& self) mutable {
    auto& gx = x.grad();
    const auto& dx2 = x.data();
    for (std::size_t i = 0; i < gx.size(); ++i) {
      T xi = dx2[i];
      gx[i] += self.grad[i] * (detail::norm_cdf(xi) + xi * detail::norm_pdf(xi));
    }
  });
  return out;
}

template <typename T>
inline Tensor<T> silu(const Tensor<T>& x) {
  std::vector<T> v(x.numel());
  const auto& dx = x.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = dx[i] * detail::sigmoid_val(dx[i]);
  Tensor<T> out = Tensor<T>::from(std::move(v), x.shape());
  attach_tape<T>(out, "silu", {x}, [x](TensorNode<T>& self) mutable {
    auto& gx = x.grad();
    const auto& dx2 = x.data();
    for (std::size_t i = 0; i < gx.size(); ++i) {
      T s = detail::sigmoid_val(dx2[i]);
      gx[i] += self.grad[i] * s * (T(1) + dx2[i] * (T(1) - s));
    }
  });
  return out;
}

template <typename T>
inline Tensor<T> log_op(const Tensor<T>& x) {
  std::vector<T> v(x.numel());
  const auto& dx = x.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::log(dx[i]);
  Tensor<T> out = Tensor<T>::from(std::move(v), x.shape());
  attach_tape<T>(out, "log", {x}, [x](TensorNode<T>& self) mutable {
    auto& gx = x.grad();
    const auto& dx2 = x.data();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i] / dx2[i];
  });
  return out;
}

/// x^e for a constant exponent; e = 0 gives exactly 1 with zero gradient
template <typename T>
inline Tensor<T> pow_const(const Tensor<T>& x, T e) {
  std::vector<T> v(x.numel());
  const auto& dx = x.data();
  if (e == T(0)) {
    std::fill(v.begin(), v.end(), T(1));
  } else {
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::pow(dx[i], e);
  }
  Tensor<T> out = Tensor<T>::from(std::move(v), x.shape());
  attach_tape<T>(out, "pow_const", {x}, [x, e](TensorNode<T>& self) mutable {
    if (e == T(0)) return;
    auto& gx = x.grad();
    const auto& dx2 = x.data();
    for (std::size_t i = 0; i < gx.size(); ++i)
      gx[i] += self.grad[i] * e * std::pow(dx2[i], e - T(1));
  });
  return out;
}

template <typename T>
inline Tensor<T> clamp(const Tensor<T>& x, T lo, T hi) {
  if (!(lo <= hi)) tensor_fail("clamp: lo > hi");
  std::vector<T> v(x.numel());
  const auto& dx = x.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::min(std::max(dx[i], lo), hi);
  Tensor<T> out = Tensor<T>::from(std::move(v), x.shape());
  attach_tape<T>(out, "clamp", {x}, [x, lo, hi](TensorNode<T>& self) mutable {
    auto& gx = x.grad();
    const auto& dx2 = x.data();
    for (std::size_t i = 0; i < gx.size(); ++i)
      if (dx2[i] > lo && dx2[i] < hi) gx[i] += self.grad[i];
  });
  return out;
}

// ---------------------------------------------------------------------------
// softmax / dropout
// ---------------------------------------------------------------------------

template <typename T>
inline Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
  if (axis >= x.rank()) tensor_fail("softmax: axis out of range for shape " + shape_str(x.shape()));
  std::size_t outer = 1, inner = 1, ax = x.dim(axis);
  for (std::size_t d = 0; d < axis; ++d) outer *= x.dim(d);
  for (std::size_t d = axis + 1; d < x.rank(); ++d) inner *= x.dim(d);
  std::vector<T> v(x.numel());
  const auto& dx = x.data();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t i = 0; i < inner; ++i) {
      T mx = dx[(o * ax) * inner + i];
      for (std::size_t a = 1; a < ax; ++a) mx = std::max(mx, dx[(o * ax + a) * inner + i]);
      T sum = T(0);
      for (std::size_t a = 0; a < ax; ++a) {
        std::size_t idx = (o * ax + a) * inner + i;
        v[idx] = std::exp(dx[idx] - mx);
        sum += v[idx];
      }
      T inv = T(1) / sum;
      for (std::size_t a = 0; a < ax; ++a) v[(o * ax + a) * inner + i] *= inv;
    }
  Tensor<T> out = Tensor<T>::from(std::move(v), x.shape());
  attach_tape<T>(out, "softmax", {x}, [x, outer, inner, ax](TensorNode<T>& self) mutable {
    auto& gx = x.grad();
    const auto& y = self.data;
    const auto& g = self.grad;
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t i = 0; i < inner; ++i) {
        T dot = T(0);
        for (std::size_t a = 0; a < ax; ++a) {
          std::size_t idx = (o * ax + a) * inner + i;
          dot += g[idx] * y[idx];
        }
        for (std::size_t a = 0; a < ax; ++a) {
          std::size_t idx = (o * ax + a) * inner + i;
          gx[idx] += y[idx] * (g[idx] - dot);
        }
      }
  });
  return out;
}

/// Inverted dropout: train mode zeroes with probability `rate` and scales
/// survivors by 1/(1-rate); eval mode is the identity.
template <typename T>
inline Tensor<T> dropout(const Tensor<T>& x, double rate, bool train, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) tensor_fail("dropout: rate must lie in [0, 1)");
  if (!train) return x;
  T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  auto mask = std::make_shared<std::vector<T>>(x.numel());
  std::vector<T> v(x.numel());
  const auto& dx = x.data();
  for (std::size_t i = 0; i < v.size(); ++i) {
    T m = rng.uniform() < rate ? T(0) : keep_scale;
    (*mask)[i] = m;
    v[i] = dx[i] * m;
  }
  Tensor<T> out = Tensor<T>::from(std::move(v), x.shape());
  attach_tape<T>(out, "dropout", {x}, [x, mask](TensorNode<T>& self) mutable {
    auto& gx = x.grad();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i] * (*mask)[i];
  });
  return out;
}

}  // namespace lungx
