#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "doors/kernels.hpp"
#include "doors/tensor.hpp"

// Reverse-mode tape over Tensor<T>. One graph is built per training step /
// forward call and discarded. Templated so the finite-difference gradient
// checks can run the identical code in double precision; the float
// instantiation routes the hot loops through the runtime-dispatched kernels.
namespace doors {

namespace detail {

template <typename T>
struct Blas {
  static void gemm_nn(int M, int N, int K, const T* A, int lda, const T* B, int ldb, T* C,
                      int ldc, bool acc) {
    kern::ref::gemm_nn(M, N, K, A, lda, B, ldb, C, ldc, acc);
  }
  static void gemm_nt(int M, int N, int K, const T* A, int lda, const T* B, int ldb, T* C,
                      int ldc, bool acc) {
    kern::ref::gemm_nt(M, N, K, A, lda, B, ldb, C, ldc, acc);
  }
  static void gemm_tn(int M, int N, int K, const T* A, int lda, const T* B, int ldb, T* C,
                      int ldc, bool acc) {
    kern::ref::gemm_tn(M, N, K, A, lda, B, ldb, C, ldc, acc);
  }
  static void elu_fwd(const T* x, T* y, int64_t n) { kern::ref::elu_fwd(x, y, n); }
  static void elu_bwd(const T* x, const T* y, const T* dy, T* dx, int64_t n) {
    kern::ref::elu_bwd(x, y, dy, dx, n);
  }
  static void sigmoid_fwd(const T* x, T* y, int64_t n) { kern::ref::sigmoid_fwd(x, y, n); }
  static void sigmoid_bwd(const T* y, const T* dy, T* dx, int64_t n) {
    kern::ref::sigmoid_bwd(y, dy, dx, n);
  }
  static void axpy(T a, const T* x, T* y, int64_t n) { kern::ref::axpy(a, x, y, n); }
  static void vadd(const T* a, const T* b, T* c, int64_t n) { kern::ref::vadd(a, b, c, n); }
  static void vsub(const T* a, const T* b, T* c, int64_t n) { kern::ref::vsub(a, b, c, n); }
  static void vmul(const T* a, const T* b, T* c, int64_t n) { kern::ref::vmul(a, b, c, n); }
  static double sq_diff_sum(const T* a, const T* b, int64_t n) {
    return kern::ref::sq_diff_sum(a, b, n);
  }
};

template <>
struct Blas<float> {
  static void gemm_nn(int M, int N, int K, const float* A, int lda, const float* B, int ldb,
                      float* C, int ldc, bool acc) {
    kern::active().sgemm_nn(M, N, K, A, lda, B, ldb, C, ldc, acc);
  }
  static void gemm_nt(int M, int N, int K, const float* A, int lda, const float* B, int ldb,
                      float* C, int ldc, bool acc) {
    kern::active().sgemm_nt(M, N, K, A, lda, B, ldb, C, ldc, acc);
  }
  static void gemm_tn(int M, int N, int K, const float* A, int lda, const float* B, int ldb,
                      float* C, int ldc, bool acc) {
    kern::active().sgemm_tn(M, N, K, A, lda, B, ldb, C, ldc, acc);
  }
  static void elu_fwd(const float* x, float* y, int64_t n) { kern::active().elu_fwd(x, y, n); }
  static void elu_bwd(const float* x, const float* y, const float* dy, float* dx, int64_t n) {
    kern::active().elu_bwd(x, y, dy, dx, n);
  }
  static void sigmoid_fwd(const float* x, float* y, int64_t n) {
    kern::active().sigmoid_fwd(x, y, n);
  }
  static void sigmoid_bwd(const float* y, const float* dy, float* dx, int64_t n) {
    kern::active().sigmoid_bwd(y, dy, dx, n);
  }
  static void axpy(float a, const float* x, float* y, int64_t n) {
    kern::active().axpy(a, x, y, n);
  }
  static void vadd(const float* a, const float* b, float* c, int64_t n) {
    kern::active().vadd(a, b, c, n);
  }
  static void vsub(const float* a, const float* b, float* c, int64_t n) {
    kern::active().vsub(a, b, c, n);
  }
  static void vmul(const float* a, const float* b, float* c, int64_t n) {
    kern::active().vmul(a, b, c, n);
  }
  static double sq_diff_sum(const float* a, const float* b, int64_t n) {
    return kern::active().sq_diff_sum(a, b, n);
  }
};

// NHWC im2col/col2im. "grid" is the convolution's output lattice; for a
// transposed convolution it is the (smaller) input lattice.
template <typename T>
void im2col(const T* img, int imgH, int imgW, int C, int k, int stride, int pad, int gridH,
            int gridW, T* cols) {
  const int patch = k * k * C;
  for (int gy = 0; gy < gridH; ++gy) {
    for (int gx = 0; gx < gridW; ++gx) {
      T* row = cols + (static_cast<size_t>(gy) * gridW + gx) * patch;
      for (int ky = 0; ky < k; ++ky) {
        const int iy = gy * stride - pad + ky;
        for (int kx = 0; kx < k; ++kx) {
          const int ix = gx * stride - pad + kx;
          T* dst = row + (static_cast<size_t>(ky) * k + kx) * C;
          if (iy >= 0 && iy < imgH && ix >= 0 && ix < imgW) {
            const T* src = img + (static_cast<size_t>(iy) * imgW + ix) * C;
            std::copy(src, src + C, dst);
          } else {
            std::fill(dst, dst + C, T(0));
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_acc(const T* cols, int imgH, int imgW, int C, int k, int stride, int pad, int gridH,
                int gridW, T* img) {
  const int patch = k * k * C;
  for (int gy = 0; gy < gridH; ++gy) {
    for (int gx = 0; gx < gridW; ++gx) {
      const T* row = cols + (static_cast<size_t>(gy) * gridW + gx) * patch;
      for (int ky = 0; ky < k; ++ky) {
        const int iy = gy * stride - pad + ky;
        if (iy < 0 || iy >= imgH) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int ix = gx * stride - pad + kx;
          if (ix < 0 || ix >= imgW) continue;
          T* dst = img + (static_cast<size_t>(iy) * imgW + ix) * C;
          const T* src = row + (static_cast<size_t>(ky) * k + kx) * C;
          for (int c = 0; c < C; ++c) dst[c] += src[c];
        }
      }
    }
  }
}

}  // namespace detail

struct ConvGeom {
  int B, H, W, Cin, Cout, k, stride, pad;
  int oh() const { return (H + 2 * pad - k) / stride + 1; }
  int ow() const { return (W + 2 * pad - k) / stride + 1; }
};

struct DeconvGeom {
  int B, H, W, Cin, Cout, k, stride, pad, outpad;
  int oh() const { return (H - 1) * stride - 2 * pad + k + outpad; }
  int ow() const { return (W - 1) * stride - 2 * pad + k + outpad; }
};

using NodeId = int;

template <typename T>
class Graph {
 public:
  struct Node {
    Tensor<T> own_val;
    const Tensor<T>* ext_val = nullptr;  // set for parameter nodes
    Tensor<T>* ext_grad = nullptr;       // parameter gradient sink
    Tensor<T> grad;
    bool grad_ready = false;
    bool needs_grad = false;
    std::function<void(Graph&)> bwd;
  };

  const Tensor<T>& val(NodeId id) const {
    const Node& n = nodes_[id];
    return n.ext_val ? *n.ext_val : n.own_val;
  }

  Tensor<T>& grad(NodeId id) {
    Node& n = nodes_[id];
    if (n.ext_grad) return *n.ext_grad;
    if (!n.grad_ready) {
      n.grad = Tensor<T>(val(id).dims);
      n.grad_ready = true;
    }
    return n.grad;
  }

  bool has_grad(NodeId id) const {
    const Node& n = nodes_[id];
    return n.ext_grad != nullptr || n.grad_ready;
  }

  bool needs_grad(NodeId id) const { return nodes_[id].needs_grad; }

  NodeId input(Tensor<T> v) {
    Node n;
    n.own_val = std::move(v);
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
  }

  NodeId param(const Tensor<T>& value, Tensor<T>* grad_sink) {
    Node n;
    n.ext_val = &value;
    n.ext_grad = grad_sink;
    n.needs_grad = true;
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
  }

  // y[M,N] = x[M,K] * W[K,N] + b[N]; M inferred from x.numel()/K
  NodeId linear(NodeId x, NodeId Wn, NodeId bn) {
    const Tensor<T>& W = val(Wn);
    const int K = W.dims[0];
    const int N = W.dims[1];
    const int64_t M = val(x).numel() / K;
    if (M * K != val(x).numel()) throw std::invalid_argument("linear: shape mismatch");
    Tensor<T> y({static_cast<int>(M), N});
    detail::Blas<T>::gemm_nn(static_cast<int>(M), N, K, val(x).ptr(), K, W.ptr(), N, y.ptr(), N,
                             false);
    const Tensor<T>& b = val(bn);
    for (int64_t r = 0; r < M; ++r) detail::Blas<T>::vadd(y.row_ptr(r), b.ptr(), y.row_ptr(r), N);
    return make(std::move(y), {x, Wn, bn}, [x, Wn, bn, M, K, N](Graph& g) {
      const Tensor<T>& dy = g.self_grad();
      if (g.needs_grad(Wn)) {
        detail::Blas<T>::gemm_tn(K, N, static_cast<int>(M), g.val(x).ptr(), K, dy.ptr(), N,
                                 g.grad(Wn).ptr(), N, true);
      }
      if (g.needs_grad(bn)) {
        Tensor<T>& db = g.grad(bn);
        for (int64_t r = 0; r < M; ++r) detail::Blas<T>::axpy(T(1), dy.row_ptr(r), db.ptr(), N);
      }
      if (g.needs_grad(x)) {
        detail::Blas<T>::gemm_nt(static_cast<int>(M), K, N, dy.ptr(), N, g.val(Wn).ptr(), N,
                                 g.grad(x).ptr(), K, true);
      }
    });
  }

  // x viewed as [B,H,W,Cin]; W is [k*k*Cin, Cout]; b is [Cout]
  NodeId conv2d(NodeId x, NodeId Wn, NodeId bn, ConvGeom gm) {
    const int OH = gm.oh(), OW = gm.ow();
    const int patch = gm.k * gm.k * gm.Cin;
    const int64_t Mrows = static_cast<int64_t>(gm.B) * OH * OW;
    Tensor<T> y({gm.B, OH, OW, gm.Cout});
    std::vector<T>& cols = scratch();
    cols.resize(static_cast<size_t>(Mrows) * patch);
    for (int b = 0; b < gm.B; ++b) {
      detail::im2col(val(x).ptr() + static_cast<size_t>(b) * gm.H * gm.W * gm.Cin, gm.H, gm.W,
                     gm.Cin, gm.k, gm.stride, gm.pad, OH, OW,
                     cols.data() + static_cast<size_t>(b) * OH * OW * patch);
    }
    detail::Blas<T>::gemm_nn(static_cast<int>(Mrows), gm.Cout, patch, cols.data(), patch,
                             val(Wn).ptr(), gm.Cout, y.ptr(), gm.Cout, false);
    const Tensor<T>& bias = val(bn);
    for (int64_t r = 0; r < Mrows; ++r)
      detail::Blas<T>::vadd(y.row_ptr(r), bias.ptr(), y.row_ptr(r), gm.Cout);
    return make(std::move(y), {x, Wn, bn}, [x, Wn, bn, gm, OH, OW, patch, Mrows](Graph& g) {
      const Tensor<T>& dy = g.self_grad();
      if (g.needs_grad(bn)) {
        Tensor<T>& db = g.grad(bn);
        for (int64_t r = 0; r < Mrows; ++r)
          detail::Blas<T>::axpy(T(1), dy.row_ptr(r), db.ptr(), gm.Cout);
      }
      std::vector<T>& buf = scratch();
      buf.resize(static_cast<size_t>(Mrows) * patch);
      if (g.needs_grad(x)) {
        detail::Blas<T>::gemm_nt(static_cast<int>(Mrows), patch, gm.Cout, dy.ptr(), gm.Cout,
                                 g.val(Wn).ptr(), gm.Cout, buf.data(), patch, false);
        Tensor<T>& dx = g.grad(x);
        for (int b = 0; b < gm.B; ++b) {
          detail::col2im_acc(buf.data() + static_cast<size_t>(b) * OH * OW * patch, gm.H, gm.W,
                             gm.Cin, gm.k, gm.stride, gm.pad, OH, OW,
                             dx.ptr() + static_cast<size_t>(b) * gm.H * gm.W * gm.Cin);
        }
      }
      if (g.needs_grad(Wn)) {
        for (int b = 0; b < gm.B; ++b) {
          detail::im2col(g.val(x).ptr() + static_cast<size_t>(b) * gm.H * gm.W * gm.Cin, gm.H,
                         gm.W, gm.Cin, gm.k, gm.stride, gm.pad, OH, OW,
                         buf.data() + static_cast<size_t>(b) * OH * OW * patch);
        }
        detail::Blas<T>::gemm_tn(patch, gm.Cout, static_cast<int>(Mrows), buf.data(), patch,
                                 dy.ptr(), gm.Cout, g.grad(Wn).ptr(), gm.Cout, true);
      }
    });
  }

  // Transposed convolution; x viewed as [B,H,W,Cin]; W is [k*k*Cout, Cin].
  NodeId deconv2d(NodeId x, NodeId Wn, NodeId bn, DeconvGeom gm) {
    const int OH = gm.oh(), OW = gm.ow();
    const int patch = gm.k * gm.k * gm.Cout;
    const int64_t Mrows = static_cast<int64_t>(gm.B) * gm.H * gm.W;
    Tensor<T> y({gm.B, OH, OW, gm.Cout});
    std::vector<T>& cols = scratch();
    cols.resize(static_cast<size_t>(Mrows) * patch);
    detail::Blas<T>::gemm_nt(static_cast<int>(Mrows), patch, gm.Cin, val(x).ptr(), gm.Cin,
                             val(Wn).ptr(), gm.Cin, cols.data(), patch, false);
    for (int b = 0; b < gm.B; ++b) {
      detail::col2im_acc(cols.data() + static_cast<size_t>(b) * gm.H * gm.W * patch, OH, OW,
                         gm.Cout, gm.k, gm.stride, gm.pad, gm.H, gm.W,
                         y.ptr() + static_cast<size_t>(b) * OH * OW * gm.Cout);
    }
    const Tensor<T>& bias = val(bn);
    const int64_t yrows = static_cast<int64_t>(gm.B) * OH * OW;
    for (int64_t r = 0; r < yrows; ++r)
      detail::Blas<T>::vadd(y.row_ptr(r), bias.ptr(), y.row_ptr(r), gm.Cout);
    return make(std::move(y), {x, Wn, bn}, [x, Wn, bn, gm, OH, OW, patch, Mrows, yrows](Graph& g) {
      const Tensor<T>& dy = g.self_grad();
      if (g.needs_grad(bn)) {
        Tensor<T>& db = g.grad(bn);
        for (int64_t r = 0; r < yrows; ++r)
          detail::Blas<T>::axpy(T(1), dy.row_ptr(r), db.ptr(), gm.Cout);
      }
      std::vector<T>& buf = scratch();
      buf.resize(static_cast<size_t>(Mrows) * patch);
      for (int b = 0; b < gm.B; ++b) {
        detail::im2col(dy.ptr() + static_cast<size_t>(b) * OH * OW * gm.Cout, OH, OW, gm.Cout,
                       gm.k, gm.stride, gm.pad, gm.H, gm.W,
                       buf.data() + static_cast<size_t>(b) * gm.H * gm.W * patch);
      }
      if (g.needs_grad(x)) {
        detail::Blas<T>::gemm_nn(static_cast<int>(Mrows), gm.Cin, patch, buf.data(), patch,
                                 g.val(Wn).ptr(), gm.Cin, g.grad(x).ptr(), gm.Cin, true);
      }
      if (g.needs_grad(Wn)) {
        detail::Blas<T>::gemm_tn(patch, gm.Cin, static_cast<int>(Mrows), buf.data(), patch,
                                 g.val(x).ptr(), gm.Cin, g.grad(Wn).ptr(), gm.Cin, true);
      }
    });
  }

  NodeId elu(NodeId x) {
    Tensor<T> y(val(x).dims);
    detail::Blas<T>::elu_fwd(val(x).ptr(), y.ptr(), y.numel());
    return make(std::move(y), {x}, [x](Graph& g) {
      if (!g.needs_grad(x)) return;
      const NodeId self = g.cur_;
      detail::Blas<T>::elu_bwd(g.val(x).ptr(), g.val(self).ptr(), g.self_grad().ptr(),
                               g.grad(x).ptr(), g.val(x).numel());
    });
  }

  NodeId sigmoid(NodeId x) {
    Tensor<T> y(val(x).dims);
    detail::Blas<T>::sigmoid_fwd(val(x).ptr(), y.ptr(), y.numel());
    return make(std::move(y), {x}, [x](Graph& g) {
      if (!g.needs_grad(x)) return;
      const NodeId self = g.cur_;
      detail::Blas<T>::sigmoid_bwd(g.val(self).ptr(), g.self_grad().ptr(), g.grad(x).ptr(),
                                   g.val(x).numel());
    });
  }

  NodeId add(NodeId a, NodeId b) {
    Tensor<T> y(val(a).dims);
    detail::Blas<T>::vadd(val(a).ptr(), val(b).ptr(), y.ptr(), y.numel());
    return make(std::move(y), {a, b}, [a, b](Graph& g) {
      const Tensor<T>& dy = g.self_grad();
      if (g.needs_grad(a)) detail::Blas<T>::axpy(T(1), dy.ptr(), g.grad(a).ptr(), dy.numel());
      if (g.needs_grad(b)) detail::Blas<T>::axpy(T(1), dy.ptr(), g.grad(b).ptr(), dy.numel());
    });
  }

  NodeId sub(NodeId a, NodeId b) {
    Tensor<T> y(val(a).dims);
    detail::Blas<T>::vsub(val(a).ptr(), val(b).ptr(), y.ptr(), y.numel());
    return make(std::move(y), {a, b}, [a, b](Graph& g) {
      const Tensor<T>& dy = g.self_grad();
      if (g.needs_grad(a)) detail::Blas<T>::axpy(T(1), dy.ptr(), g.grad(a).ptr(), dy.numel());
      if (g.needs_grad(b)) detail::Blas<T>::axpy(T(-1), dy.ptr(), g.grad(b).ptr(), dy.numel());
    });
  }

  NodeId mul(NodeId a, NodeId b) {
    Tensor<T> y(val(a).dims);
    detail::Blas<T>::vmul(val(a).ptr(), val(b).ptr(), y.ptr(), y.numel());
    return make(std::move(y), {a, b}, [a, b](Graph& g) {
      const Tensor<T>& dy = g.self_grad();
      std::vector<T>& buf = scratch();
      buf.resize(dy.numel());
      if (g.needs_grad(a)) {
        detail::Blas<T>::vmul(dy.ptr(), g.val(b).ptr(), buf.data(), dy.numel());
        detail::Blas<T>::axpy(T(1), buf.data(), g.grad(a).ptr(), dy.numel());
      }
      if (g.needs_grad(b)) {
        detail::Blas<T>::vmul(dy.ptr(), g.val(a).ptr(), buf.data(), dy.numel());
        detail::Blas<T>::axpy(T(1), buf.data(), g.grad(b).ptr(), dy.numel());
      }
    });
  }

  NodeId scale(NodeId x, T c) {
    Tensor<T> y(val(x).dims);
    for (int64_t i = 0; i < y.numel(); ++i) y.data[i] = val(x).data[i] * c;
    return make(std::move(y), {x}, [x, c](Graph& g) {
      if (g.needs_grad(x))
        detail::Blas<T>::axpy(c, g.self_grad().ptr(), g.grad(x).ptr(), g.self_grad().numel());
    });
  }

  NodeId concat_cols(NodeId a, NodeId b) {
    const int64_t M = val(a).rows();
    const int Na = val(a).cols(), Nb = val(b).cols();
    if (val(b).rows() != M) throw std::invalid_argument("concat_cols: row mismatch");
    Tensor<T> y({static_cast<int>(M), Na + Nb});
    for (int64_t r = 0; r < M; ++r) {
      std::copy(val(a).row_ptr(r), val(a).row_ptr(r) + Na, y.row_ptr(r));
      std::copy(val(b).row_ptr(r), val(b).row_ptr(r) + Nb, y.row_ptr(r) + Na);
    }
    return make(std::move(y), {a, b}, [a, b, M, Na, Nb](Graph& g) {
      const Tensor<T>& dy = g.self_grad();
      if (g.needs_grad(a)) {
        Tensor<T>& da = g.grad(a);
        for (int64_t r = 0; r < M; ++r)
          detail::Blas<T>::axpy(T(1), dy.row_ptr(r), da.row_ptr(r), Na);
      }
      if (g.needs_grad(b)) {
        Tensor<T>& db = g.grad(b);
        for (int64_t r = 0; r < M; ++r)
          detail::Blas<T>::axpy(T(1), dy.row_ptr(r) + Na, db.row_ptr(r), Nb);
      }
    });
  }

  NodeId slice_cols(NodeId x, int j0, int width) {
    const int64_t M = val(x).rows();
    const int N = val(x).cols();
    if (j0 < 0 || j0 + width > N) throw std::invalid_argument("slice_cols: out of range");
    Tensor<T> y({static_cast<int>(M), width});
    for (int64_t r = 0; r < M; ++r)
      std::copy(val(x).row_ptr(r) + j0, val(x).row_ptr(r) + j0 + width, y.row_ptr(r));
    return make(std::move(y), {x}, [x, j0, width, M](Graph& g) {
      if (!g.needs_grad(x)) return;
      const Tensor<T>& dy = g.self_grad();
      Tensor<T>& dx = g.grad(x);
      for (int64_t r = 0; r < M; ++r)
        detail::Blas<T>::axpy(T(1), dy.row_ptr(r), dx.row_ptr(r) + j0, width);
    });
  }

  NodeId repeat_rows(NodeId x, int times) {
    const int64_t G = val(x).rows();
    const int N = val(x).cols();
    Tensor<T> y({static_cast<int>(G * times), N});
    for (int64_t gi = 0; gi < G; ++gi)
      for (int s = 0; s < times; ++s)
        std::copy(val(x).row_ptr(gi), val(x).row_ptr(gi) + N, y.row_ptr(gi * times + s));
    return make(std::move(y), {x}, [x, times, G, N](Graph& g) {
      if (!g.needs_grad(x)) return;
      const Tensor<T>& dy = g.self_grad();
      Tensor<T>& dx = g.grad(x);
      for (int64_t gi = 0; gi < G; ++gi)
        for (int s = 0; s < times; ++s)
          detail::Blas<T>::axpy(T(1), dy.row_ptr(gi * times + s), dx.row_ptr(gi), N);
    });
  }

  // Set pooling: mean over each group of `group` consecutive rows. Addends are
  // sorted per feature before summation so the result is exactly invariant
  // under permutation of the rows within a group.
  NodeId segment_mean_sorted(NodeId x, int group) {
    const int64_t M = val(x).rows();
    const int N = val(x).cols();
    if (M % group != 0) throw std::invalid_argument("segment_mean_sorted: rows % group != 0");
    const int64_t G = M / group;
    Tensor<T> y({static_cast<int>(G), N});
    std::vector<T> vals(group);
    for (int64_t gi = 0; gi < G; ++gi) {
      for (int j = 0; j < N; ++j) {
        for (int s = 0; s < group; ++s) vals[s] = val(x).data[(gi * group + s) * N + j];
        std::sort(vals.begin(), vals.end());
        T acc = 0;
        for (int s = 0; s < group; ++s) acc += vals[s];
        y.data[gi * N + j] = acc / T(group);
      }
    }
    return make(std::move(y), {x}, [x, group, G, N](Graph& g) {
      if (!g.needs_grad(x)) return;
      const Tensor<T>& dy = g.self_grad();
      Tensor<T>& dx = g.grad(x);
      const T inv = T(1) / T(group);
      for (int64_t gi = 0; gi < G; ++gi)
        for (int s = 0; s < group; ++s)
          detail::Blas<T>::axpy(inv, dy.row_ptr(gi), dx.row_ptr(gi * group + s), N);
    });
  }

  NodeId segment_sum(NodeId x, int group) {
    const int64_t M = val(x).rows();
    const int N = val(x).cols();
    if (M % group != 0) throw std::invalid_argument("segment_sum: rows % group != 0");
    const int64_t G = M / group;
    Tensor<T> y({static_cast<int>(G), N});
    for (int64_t gi = 0; gi < G; ++gi)
      for (int s = 0; s < group; ++s)
        detail::Blas<T>::axpy(T(1), val(x).row_ptr(gi * group + s), y.row_ptr(gi), N);
    return make(std::move(y), {x}, [x, group, G, N](Graph& g) {
      if (!g.needs_grad(x)) return;
      const Tensor<T>& dy = g.self_grad();
      Tensor<T>& dx = g.grad(x);
      for (int64_t gi = 0; gi < G; ++gi)
        for (int s = 0; s < group; ++s)
          detail::Blas<T>::axpy(T(1), dy.row_ptr(gi), dx.row_ptr(gi * group + s), N);
    });
  }

  NodeId mean_all(NodeId x) {
    const int64_t n = val(x).numel();
    T s = 0;
    for (int64_t i = 0; i < n; ++i) s += val(x).data[i];
    Tensor<T> y({1, 1});
    y.data[0] = s / T(n);
    return make(std::move(y), {x}, [x, n](Graph& g) {
      if (!g.needs_grad(x)) return;
      const T gv = g.self_grad().data[0] / T(n);
      Tensor<T>& dx = g.grad(x);
      for (int64_t i = 0; i < n; ++i) dx.data[i] += gv;
    });
  }

  NodeId clamp(NodeId x, T lo, T hi) {
    Tensor<T> y(val(x).dims);
    for (int64_t i = 0; i < y.numel(); ++i) y.data[i] = std::min(hi, std::max(lo, val(x).data[i]));
    return make(std::move(y), {x}, [x, lo, hi](Graph& g) {
      if (!g.needs_grad(x)) return;
      const Tensor<T>& dy = g.self_grad();
      const Tensor<T>& xv = g.val(x);
      Tensor<T>& dx = g.grad(x);
      for (int64_t i = 0; i < dy.numel(); ++i)
        if (xv.data[i] >= lo && xv.data[i] <= hi) dx.data[i] += dy.data[i];
    });
  }

  // sample = mean + exp(logvar/2) * eps
  NodeId reparam(NodeId mean, NodeId logvar, NodeId eps) {
    Tensor<T> y(val(mean).dims);
    for (int64_t i = 0; i < y.numel(); ++i)
      y.data[i] = val(mean).data[i] + std::exp(val(logvar).data[i] / T(2)) * val(eps).data[i];
    return make(std::move(y), {mean, logvar, eps}, [mean, logvar, eps](Graph& g) {
      const Tensor<T>& dy = g.self_grad();
      if (g.needs_grad(mean))
        detail::Blas<T>::axpy(T(1), dy.ptr(), g.grad(mean).ptr(), dy.numel());
      if (g.needs_grad(logvar)) {
        const Tensor<T>& lv = g.val(logvar);
        const Tensor<T>& ev = g.val(eps);
        Tensor<T>& dl = g.grad(logvar);
        for (int64_t i = 0; i < dy.numel(); ++i)
          dl.data[i] += dy.data[i] * T(0.5) * std::exp(lv.data[i] / T(2)) * ev.data[i];
      }
    });
  }

  // Per-row KL(N(mq,exp(lq)) || N(mp,exp(lp))) for diagonal Gaussians -> [M,1]
  NodeId gaussian_kl_rows(NodeId mq, NodeId lq, NodeId mp, NodeId lp) {
    const int64_t M = val(mq).rows();
    const int d = val(mq).cols();
    Tensor<T> y({static_cast<int>(M), 1});
    for (int64_t r = 0; r < M; ++r) {
      T s = 0;
      for (int j = 0; j < d; ++j) {
        const T dlq = val(lq).row_ptr(r)[j], dlp = val(lp).row_ptr(r)[j];
        const T dm = val(mq).row_ptr(r)[j] - val(mp).row_ptr(r)[j];
        s += std::exp(dlq - dlp) + dm * dm * std::exp(-dlp) - T(1) + dlp - dlq;
      }
      y.data[r] = s / T(2);
    }
    return make(std::move(y), {mq, lq, mp, lp}, [mq, lq, mp, lp, M, d](Graph& g) {
      const Tensor<T>& dy = g.self_grad();
      for (int64_t r = 0; r < M; ++r) {
        const T gv = dy.data[r];
        if (gv == T(0)) continue;
        for (int j = 0; j < d; ++j) {
          const T vlq = g.val(lq).row_ptr(r)[j], vlp = g.val(lp).row_ptr(r)[j];
          const T dm = g.val(mq).row_ptr(r)[j] - g.val(mp).row_ptr(r)[j];
          const T e_qp = std::exp(vlq - vlp);
          const T e_np = std::exp(-vlp);
          if (g.needs_grad(mq)) g.grad(mq).row_ptr(r)[j] += gv * dm * e_np;
          if (g.needs_grad(mp)) g.grad(mp).row_ptr(r)[j] -= gv * dm * e_np;
          if (g.needs_grad(lq)) g.grad(lq).row_ptr(r)[j] += gv * (e_qp - T(1)) / T(2);
          if (g.needs_grad(lp))
            g.grad(lp).row_ptr(r)[j] += gv * (T(1) - e_qp - dm * dm * e_np) / T(2);
        }
      }
    });
  }

  // Per-row log N(x | mu, sigma^2 I) -> [M,1]; x is a constant node.
  NodeId gaussian_loglike_rows(NodeId x, NodeId mu, T sigma) {
    const int64_t M = val(mu).rows();
    const int N = val(mu).cols();
    const T log_norm = -std::log(sigma) - T(0.5) * std::log(T(2) * T(M_PI));
    Tensor<T> y({static_cast<int>(M), 1});
    for (int64_t r = 0; r < M; ++r) {
      const double ss = detail::Blas<T>::sq_diff_sum(val(x).row_ptr(r), val(mu).row_ptr(r), N);
      y.data[r] = static_cast<T>(-ss / (2.0 * static_cast<double>(sigma) * sigma) +
                                 static_cast<double>(log_norm) * N);
    }
    return make(std::move(y), {x, mu}, [x, mu, sigma, M, N](Graph& g) {
      if (!g.needs_grad(mu)) return;
      const Tensor<T>& dy = g.self_grad();
      Tensor<T>& dm = g.grad(mu);
      std::vector<T>& buf = scratch();
      buf.resize(N);
      const T inv_s2 = T(1) / (sigma * sigma);
      for (int64_t r = 0; r < M; ++r) {
        detail::Blas<T>::vsub(g.val(x).row_ptr(r), g.val(mu).row_ptr(r), buf.data(), N);
        detail::Blas<T>::axpy(dy.data[r] * inv_s2, buf.data(), dm.row_ptr(r), N);
      }
    });
  }

  // Per-row binary cross-entropy with logits -> [M,1]; target is constant.
  NodeId bce_logits_rows(NodeId logits, NodeId target) {
    const int64_t M = val(logits).rows();
    Tensor<T> y({static_cast<int>(M), 1});
    for (int64_t r = 0; r < M; ++r) {
      const T l = val(logits).data[r];
      const T t = val(target).data[r];
      const T sp = l > T(0) ? l + std::log1p(std::exp(-l)) : std::log1p(std::exp(l));
      y.data[r] = sp - t * l;
    }
    return make(std::move(y), {logits, target}, [logits, target, M](Graph& g) {
      if (!g.needs_grad(logits)) return;
      const Tensor<T>& dy = g.self_grad();
      Tensor<T>& dl = g.grad(logits);
      for (int64_t r = 0; r < M; ++r) {
        const T l = g.val(logits).data[r];
        const T t = g.val(target).data[r];
        const T sig = T(1) / (T(1) + std::exp(-l));
        dl.data[r] += dy.data[r] * (sig - t);
      }
    });
  }

  // Per-row sum of squared differences -> [M,1]; target is constant.
  NodeId sq_err_rows(NodeId pred, NodeId target) {
    const int64_t M = val(pred).rows();
    const int N = val(pred).cols();
    Tensor<T> y({static_cast<int>(M), 1});
    for (int64_t r = 0; r < M; ++r)
      y.data[r] =
          static_cast<T>(detail::Blas<T>::sq_diff_sum(val(pred).row_ptr(r), val(target).row_ptr(r), N));
    return make(std::move(y), {pred, target}, [pred, target, M, N](Graph& g) {
      if (!g.needs_grad(pred)) return;
      const Tensor<T>& dy = g.self_grad();
      Tensor<T>& dp = g.grad(pred);
      std::vector<T>& buf = scratch();
      buf.resize(N);
      for (int64_t r = 0; r < M; ++r) {
        detail::Blas<T>::vsub(g.val(pred).row_ptr(r), g.val(target).row_ptr(r), buf.data(), N);
        detail::Blas<T>::axpy(T(2) * dy.data[r], buf.data(), dp.row_ptr(r), N);
      }
    });
  }

  // Single-shot: call once per built graph.
  void backward(NodeId loss) {
    if (val(loss).numel() != 1) throw std::invalid_argument("backward: loss must be scalar");
    grad(loss).data[0] = T(1);
    for (NodeId id = loss; id >= 0; --id) {
      Node& n = nodes_[id];
      if (!n.needs_grad || !n.bwd) continue;
      if (!has_grad(id)) continue;  // not on the path to the loss
      self_grad_ = n.ext_grad ? n.ext_grad : &n.grad;
      cur_ = id;
      n.bwd(*this);
    }
  }

  const Tensor<T>& self_grad() const { return *self_grad_; }

  size_t size() const { return nodes_.size(); }

 private:
  static std::vector<T>& scratch() {
    static thread_local std::vector<T> buf;
    return buf;
  }

  NodeId make(Tensor<T> value, std::initializer_list<NodeId> parents,
              std::function<void(Graph&)> bwd) {
    Node n;
    n.own_val = std::move(value);
    for (NodeId p : parents) n.needs_grad |= nodes_[p].needs_grad;
    if (n.needs_grad) n.bwd = std::move(bwd);
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
  const Tensor<T>* self_grad_ = nullptr;
  NodeId cur_ = -1;

  friend struct GraphTestAccess;
};

}  // namespace doors
