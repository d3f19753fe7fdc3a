#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

// Data-parallel inner loops behind the tensor graph. A scalar reference
// implementation always exists; SIMD variants (AVX2 on x86-64, NEON on
// aarch64) are selected at runtime and equivalence-tested against the
// reference. All matrices are row-major.
namespace doors::kern {

struct Ops {
  const char* name;

  // C[M,N] = (acc ? C : 0) + A[M,K] * B[K,N]
  void (*sgemm_nn)(int M, int N, int K, const float* A, int lda, const float* B, int ldb,
                   float* C, int ldc, bool acc);
  // C[M,N] = (acc ? C : 0) + A[M,K] * B[N,K]^T
  void (*sgemm_nt)(int M, int N, int K, const float* A, int lda, const float* B, int ldb,
                   float* C, int ldc, bool acc);
  // C[M,N] = (acc ? C : 0) + A[K,M]^T * B[K,N]
  void (*sgemm_tn)(int M, int N, int K, const float* A, int lda, const float* B, int ldb,
                   float* C, int ldc, bool acc);

  void (*elu_fwd)(const float* x, float* y, int64_t n);
  // dx += dy * elu'(x); y is the forward output (elu(x) = y, so exp(x) = y+1 for x<=0)
  void (*elu_bwd)(const float* x, const float* y, const float* dy, float* dx, int64_t n);
  void (*sigmoid_fwd)(const float* x, float* y, int64_t n);
  // dx += dy * y * (1 - y)
  void (*sigmoid_bwd)(const float* y, const float* dy, float* dx, int64_t n);

  void (*vexp)(const float* x, float* y, int64_t n);
  void (*axpy)(float a, const float* x, float* y, int64_t n);  // y += a*x
  void (*vscale)(float a, float* x, int64_t n);
  void (*vadd)(const float* a, const float* b, float* c, int64_t n);
  void (*vsub)(const float* a, const float* b, float* c, int64_t n);
  void (*vmul)(const float* a, const float* b, float* c, int64_t n);

  // Reductions accumulate in double so scalar/SIMD agree tightly.
  double (*vsum)(const float* x, int64_t n);
  double (*vdot)(const float* a, const float* b, int64_t n);
  double (*sq_diff_sum)(const float* a, const float* b, int64_t n);

  // p -= lr * m_hat / (sqrt(v_hat) + eps), with m/v updated in place.
  void (*adam_step)(float* p, const float* g, float* m, float* v, int64_t n, float lr, float b1,
                    float b2, float eps, float inv_bc1, float inv_bc2);
};

const Ops& active();
const Ops& scalar_ops();
bool select(std::string_view name);  // "scalar" | "avx2" | "neon"; false if unavailable
std::vector<const Ops*> available();

// ---------------------------------------------------------------------------
// Reference implementations, templated so the double-precision graph used by
// the gradient checks runs the same algorithms.
namespace ref {

template <typename T>
void gemm_nn(int M, int N, int K, const T* A, int lda, const T* B, int ldb, T* C, int ldc,
             bool acc) {
  for (int i = 0; i < M; ++i) {
    T* c = C + static_cast<size_t>(i) * ldc;
    if (!acc) std::fill(c, c + N, T(0));
    const T* a = A + static_cast<size_t>(i) * lda;
    for (int k = 0; k < K; ++k) {
      const T aik = a[k];
      const T* b = B + static_cast<size_t>(k) * ldb;
      for (int j = 0; j < N; ++j) c[j] += aik * b[j];
    }
  }
}

template <typename T>
void gemm_nt(int M, int N, int K, const T* A, int lda, const T* B, int ldb, T* C, int ldc,
             bool acc) {
  for (int i = 0; i < M; ++i) {
    const T* a = A + static_cast<size_t>(i) * lda;
    T* c = C + static_cast<size_t>(i) * ldc;
    for (int j = 0; j < N; ++j) {
      const T* b = B + static_cast<size_t>(j) * ldb;
      T s = 0;
      for (int k = 0; k < K; ++k) s += a[k] * b[k];
      c[j] = acc ? c[j] + s : s;
    }
  }
}

template <typename T>
void gemm_tn(int M, int N, int K, const T* A, int lda, const T* B, int ldb, T* C, int ldc,
             bool acc) {
  if (!acc) {
    for (int i = 0; i < M; ++i) std::fill(C + static_cast<size_t>(i) * ldc, C + static_cast<size_t>(i) * ldc + N, T(0));
  }
  for (int k = 0; k < K; ++k) {
    const T* a = A + static_cast<size_t>(k) * lda;
    const T* b = B + static_cast<size_t>(k) * ldb;
    for (int i = 0; i < M; ++i) {
      const T aki = a[i];
      T* c = C + static_cast<size_t>(i) * ldc;
      for (int j = 0; j < N; ++j) c[j] += aki * b[j];
    }
  }
}

template <typename T>
void elu_fwd(const T* x, T* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : std::expm1(x[i]);
}

template <typename T>
void elu_bwd(const T* x, const T* y, const T* dy, T* dx, int64_t n) {
  for (int64_t i = 0; i < n; ++i) dx[i] += dy[i] * (x[i] > T(0) ? T(1) : y[i] + T(1));
}

template <typename T>
void sigmoid_fwd(const T* x, T* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] = T(1) / (T(1) + std::exp(-x[i]));
}

template <typename T>
void sigmoid_bwd(const T* y, const T* dy, T* dx, int64_t n) {
  for (int64_t i = 0; i < n; ++i) dx[i] += dy[i] * y[i] * (T(1) - y[i]);
}

template <typename T>
void vexp(const T* x, T* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] = std::exp(x[i]);
}

template <typename T>
void axpy(T a, const T* x, T* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] += a * x[i];
}

template <typename T>
void vscale(T a, T* x, int64_t n) {
  for (int64_t i = 0; i < n; ++i) x[i] *= a;
}

template <typename T>
void vadd(const T* a, const T* b, T* c, int64_t n) {
  for (int64_t i = 0; i < n; ++i) c[i] = a[i] + b[i];
}

template <typename T>
void vsub(const T* a, const T* b, T* c, int64_t n) {
  for (int64_t i = 0; i < n; ++i) c[i] = a[i] - b[i];
}

template <typename T>
void vmul(const T* a, const T* b, T* c, int64_t n) {
  for (int64_t i = 0; i < n; ++i) c[i] = a[i] * b[i];
}

template <typename T>
double vsum(const T* x, int64_t n) {
  double s = 0;
  for (int64_t i = 0; i < n; ++i) s += static_cast<double>(x[i]);
  return s;
}

template <typename T>
double vdot(const T* a, const T* b, int64_t n) {
  double s = 0;
  for (int64_t i = 0; i < n; ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

template <typename T>
double sq_diff_sum(const T* a, const T* b, int64_t n) {
  double s = 0;
  for (int64_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s;
}

template <typename T>
void adam_step(T* p, const T* g, T* m, T* v, int64_t n, T lr, T b1, T b2, T eps, T inv_bc1,
               T inv_bc2) {
  for (int64_t i = 0; i < n; ++i) {
    m[i] = b1 * m[i] + (T(1) - b1) * g[i];
    v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
    const T mh = m[i] * inv_bc1;
    const T vh = v[i] * inv_bc2;
    p[i] -= lr * mh / (std::sqrt(vh) + eps);
  }
}

}  // namespace ref
}  // namespace doors::kern
