#include "doors/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

namespace doors::kern {
namespace {

inline float hsum8(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  lo = _mm_add_ps(lo, _mm_movehl_ps(lo, lo));
  lo = _mm_add_ss(lo, _mm_shuffle_ps(lo, lo, 1));
  return _mm_cvtss_f32(lo);
}

inline double hsum4d(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(lo) + _mm_cvtsd_f64(_mm_unpackhi_pd(lo, lo));
}

// exp for 8 floats, cephes-style polynomial (|rel err| ~ 1e-7 in float range)
inline __m256 exp256(__m256 x) {
  const __m256 exp_hi = _mm256_set1_ps(88.3762626647950f);
  const __m256 exp_lo = _mm256_set1_ps(-88.3762626647949f);
  const __m256 log2e = _mm256_set1_ps(1.44269504088896341f);
  const __m256 c1 = _mm256_set1_ps(0.693359375f);
  const __m256 c2 = _mm256_set1_ps(-2.12194440e-4f);
  const __m256 p0 = _mm256_set1_ps(1.9875691500e-4f);
  const __m256 p1 = _mm256_set1_ps(1.3981999507e-3f);
  const __m256 p2 = _mm256_set1_ps(8.3334519073e-3f);
  const __m256 p3 = _mm256_set1_ps(4.1665795894e-2f);
  const __m256 p4 = _mm256_set1_ps(1.6666665459e-1f);
  const __m256 p5 = _mm256_set1_ps(5.0000001201e-1f);
  const __m256 one = _mm256_set1_ps(1.0f);

  x = _mm256_min_ps(_mm256_max_ps(x, exp_lo), exp_hi);
  __m256 fx = _mm256_fmadd_ps(x, log2e, _mm256_set1_ps(0.5f));
  fx = _mm256_floor_ps(fx);
  x = _mm256_fnmadd_ps(fx, c1, x);
  x = _mm256_fnmadd_ps(fx, c2, x);
  __m256 z = _mm256_mul_ps(x, x);
  __m256 y = p0;
  y = _mm256_fmadd_ps(y, x, p1);
  y = _mm256_fmadd_ps(y, x, p2);
  y = _mm256_fmadd_ps(y, x, p3);
  y = _mm256_fmadd_ps(y, x, p4);
  y = _mm256_fmadd_ps(y, x, p5);
  y = _mm256_fmadd_ps(y, z, _mm256_add_ps(x, one));
  __m256i n = _mm256_cvttps_epi32(fx);
  n = _mm256_add_epi32(n, _mm256_set1_epi32(0x7f));
  n = _mm256_slli_epi32(n, 23);
  return _mm256_mul_ps(y, _mm256_castsi256_ps(n));
}

void a_gemm_nn(int M, int N, int K, const float* A, int lda, const float* B, int ldb, float* C,
               int ldc, bool acc) {
  const int NB = N & ~15;
  int i = 0;
  for (; i + 4 <= M; i += 4) {
    const float* a0 = A + static_cast<size_t>(i) * lda;
    const float* a1 = a0 + lda;
    const float* a2 = a1 + lda;
    const float* a3 = a2 + lda;
    float* c0 = C + static_cast<size_t>(i) * ldc;
    float* c1 = c0 + ldc;
    float* c2 = c1 + ldc;
    float* c3 = c2 + ldc;
    for (int j = 0; j < NB; j += 16) {
      __m256 acc00, acc01, acc10, acc11, acc20, acc21, acc30, acc31;
      if (acc) {
        acc00 = _mm256_loadu_ps(c0 + j);
        acc01 = _mm256_loadu_ps(c0 + j + 8);
        acc10 = _mm256_loadu_ps(c1 + j);
        acc11 = _mm256_loadu_ps(c1 + j + 8);
        acc20 = _mm256_loadu_ps(c2 + j);
        acc21 = _mm256_loadu_ps(c2 + j + 8);
        acc30 = _mm256_loadu_ps(c3 + j);
        acc31 = _mm256_loadu_ps(c3 + j + 8);
      } else {
        acc00 = acc01 = acc10 = acc11 = acc20 = acc21 = acc30 = acc31 = _mm256_setzero_ps();
      }
      for (int k = 0; k < K; ++k) {
        const float* b = B + static_cast<size_t>(k) * ldb + j;
        const __m256 b0 = _mm256_loadu_ps(b);
        const __m256 b1 = _mm256_loadu_ps(b + 8);
        __m256 av = _mm256_broadcast_ss(a0 + k);
        acc00 = _mm256_fmadd_ps(av, b0, acc00);
        acc01 = _mm256_fmadd_ps(av, b1, acc01);
        av = _mm256_broadcast_ss(a1 + k);
        acc10 = _mm256_fmadd_ps(av, b0, acc10);
        acc11 = _mm256_fmadd_ps(av, b1, acc11);
        av = _mm256_broadcast_ss(a2 + k);
        acc20 = _mm256_fmadd_ps(av, b0, acc20);
        acc21 = _mm256_fmadd_ps(av, b1, acc21);
        av = _mm256_broadcast_ss(a3 + k);
        acc30 = _mm256_fmadd_ps(av, b0, acc30);
        acc31 = _mm256_fmadd_ps(av, b1, acc31);
      }
      _mm256_storeu_ps(c0 + j, acc00);
      _mm256_storeu_ps(c0 + j + 8, acc01);
      _mm256_storeu_ps(c1 + j, acc10);
      _mm256_storeu_ps(c1 + j + 8, acc11);
      _mm256_storeu_ps(c2 + j, acc20);
      _mm256_storeu_ps(c2 + j + 8, acc21);
      _mm256_storeu_ps(c3 + j, acc30);
      _mm256_storeu_ps(c3 + j + 8, acc31);
    }
    for (int j = NB; j < N; ++j) {
      float s0 = acc ? c0[j] : 0.f, s1 = acc ? c1[j] : 0.f;
      float s2 = acc ? c2[j] : 0.f, s3 = acc ? c3[j] : 0.f;
      for (int k = 0; k < K; ++k) {
        const float b = B[static_cast<size_t>(k) * ldb + j];
        s0 += a0[k] * b;
        s1 += a1[k] * b;
        s2 += a2[k] * b;
        s3 += a3[k] * b;
      }
      c0[j] = s0;
      c1[j] = s1;
      c2[j] = s2;
      c3[j] = s3;
    }
  }
  for (; i < M; ++i) {
    const float* a = A + static_cast<size_t>(i) * lda;
    float* c = C + static_cast<size_t>(i) * ldc;
    for (int j = 0; j < NB; j += 16) {
      __m256 s0 = acc ? _mm256_loadu_ps(c + j) : _mm256_setzero_ps();
      __m256 s1 = acc ? _mm256_loadu_ps(c + j + 8) : _mm256_setzero_ps();
      for (int k = 0; k < K; ++k) {
        const float* b = B + static_cast<size_t>(k) * ldb + j;
        const __m256 av = _mm256_broadcast_ss(a + k);
        s0 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b), s0);
        s1 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b + 8), s1);
      }
      _mm256_storeu_ps(c + j, s0);
      _mm256_storeu_ps(c + j + 8, s1);
    }
    for (int j = NB; j < N; ++j) {
      float s = acc ? c[j] : 0.f;
      for (int k = 0; k < K; ++k) s += a[k] * B[static_cast<size_t>(k) * ldb + j];
      c[j] = s;
    }
  }
}

void a_gemm_nt(int M, int N, int K, const float* A, int lda, const float* B, int ldb, float* C,
               int ldc, bool acc) {
  const int KB = K & ~7;
  for (int i = 0; i < M; ++i) {
    const float* a = A + static_cast<size_t>(i) * lda;
    float* c = C + static_cast<size_t>(i) * ldc;
    int j = 0;
    for (; j + 4 <= N; j += 4) {
      const float* b0 = B + static_cast<size_t>(j) * ldb;
      const float* b1 = b0 + ldb;
      const float* b2 = b1 + ldb;
      const float* b3 = b2 + ldb;
      __m256 s0 = _mm256_setzero_ps(), s1 = _mm256_setzero_ps();
      __m256 s2 = _mm256_setzero_ps(), s3 = _mm256_setzero_ps();
      for (int k = 0; k < KB; k += 8) {
        const __m256 av = _mm256_loadu_ps(a + k);
        s0 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b0 + k), s0);
        s1 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b1 + k), s1);
        s2 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b2 + k), s2);
        s3 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b3 + k), s3);
      }
      float r0 = hsum8(s0), r1 = hsum8(s1), r2 = hsum8(s2), r3 = hsum8(s3);
      for (int k = KB; k < K; ++k) {
        const float av = a[k];
        r0 += av * b0[k];
        r1 += av * b1[k];
        r2 += av * b2[k];
        r3 += av * b3[k];
      }
      if (acc) {
        c[j] += r0;
        c[j + 1] += r1;
        c[j + 2] += r2;
        c[j + 3] += r3;
      } else {
        c[j] = r0;
        c[j + 1] = r1;
        c[j + 2] = r2;
        c[j + 3] = r3;
      }
    }
    for (; j < N; ++j) {
      const float* b = B + static_cast<size_t>(j) * ldb;
      __m256 s = _mm256_setzero_ps();
      for (int k = 0; k < KB; k += 8)
        s = _mm256_fmadd_ps(_mm256_loadu_ps(a + k), _mm256_loadu_ps(b + k), s);
      float r = hsum8(s);
      for (int k = KB; k < K; ++k) r += a[k] * b[k];
      c[j] = acc ? c[j] + r : r;
    }
  }
}

void a_gemm_tn(int M, int N, int K, const float* A, int lda, const float* B, int ldb, float* C,
               int ldc, bool acc) {
  if (!acc) {
    for (int i = 0; i < M; ++i) {
      float* c = C + static_cast<size_t>(i) * ldc;
      for (int j = 0; j < N; ++j) c[j] = 0.f;
    }
  }
  const int NB = N & ~7;
  int k = 0;
  for (; k + 2 <= K; k += 2) {
    const float* a0 = A + static_cast<size_t>(k) * lda;
    const float* a1 = a0 + lda;
    const float* b0 = B + static_cast<size_t>(k) * ldb;
    const float* b1 = b0 + ldb;
    for (int i = 0; i < M; ++i) {
      const __m256 av0 = _mm256_broadcast_ss(a0 + i);
      const __m256 av1 = _mm256_broadcast_ss(a1 + i);
      float* c = C + static_cast<size_t>(i) * ldc;
      int j = 0;
      for (; j < NB; j += 8) {
        __m256 cv = _mm256_loadu_ps(c + j);
        cv = _mm256_fmadd_ps(av0, _mm256_loadu_ps(b0 + j), cv);
        cv = _mm256_fmadd_ps(av1, _mm256_loadu_ps(b1 + j), cv);
        _mm256_storeu_ps(c + j, cv);
      }
      for (; j < N; ++j) c[j] += a0[i] * b0[j] + a1[i] * b1[j];
    }
  }
  for (; k < K; ++k) {
    const float* a0 = A + static_cast<size_t>(k) * lda;
    const float* b0 = B + static_cast<size_t>(k) * ldb;
    for (int i = 0; i < M; ++i) {
      const __m256 av = _mm256_broadcast_ss(a0 + i);
      float* c = C + static_cast<size_t>(i) * ldc;
      int j = 0;
      for (; j < NB; j += 8) {
        __m256 cv = _mm256_loadu_ps(c + j);
        cv = _mm256_fmadd_ps(av, _mm256_loadu_ps(b0 + j), cv);
        _mm256_storeu_ps(c + j, cv);
      }
      for (; j < N; ++j) c[j] += a0[i] * b0[j];
    }
  }
}

void a_elu_fwd(const float* x, float* y, int64_t n) {
  const __m256 one = _mm256_set1_ps(1.0f);
  const __m256 zero = _mm256_setzero_ps();
  int64_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 xv = _mm256_loadu_ps(x + i);
    const __m256 neg = _mm256_sub_ps(exp256(xv), one);
    const __m256 mask = _mm256_cmp_ps(xv, zero, _CMP_GT_OQ);
    _mm256_storeu_ps(y + i, _mm256_blendv_ps(neg, xv, mask));
  }
  for (; i < n; ++i) y[i] = x[i] > 0.f ? x[i] : std::expm1(x[i]);
}

void a_elu_bwd(const float* x, const float* y, const float* dy, float* dx, int64_t n) {
  const __m256 one = _mm256_set1_ps(1.0f);
  const __m256 zero = _mm256_setzero_ps();
  int64_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 xv = _mm256_loadu_ps(x + i);
    const __m256 yv = _mm256_loadu_ps(y + i);
    const __m256 mask = _mm256_cmp_ps(xv, zero, _CMP_GT_OQ);
    const __m256 d = _mm256_blendv_ps(_mm256_add_ps(yv, one), one, mask);
    const __m256 dv = _mm256_loadu_ps(dx + i);
    _mm256_storeu_ps(dx + i, _mm256_fmadd_ps(_mm256_loadu_ps(dy + i), d, dv));
  }
  for (; i < n; ++i) dx[i] += dy[i] * (x[i] > 0.f ? 1.f : y[i] + 1.f);
}

void a_sigmoid_fwd(const float* x, float* y, int64_t n) {
  const __m256 one = _mm256_set1_ps(1.0f);
  int64_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 xv = _mm256_loadu_ps(x + i);
    const __m256 e = exp256(_mm256_sub_ps(_mm256_setzero_ps(), xv));
    _mm256_storeu_ps(y + i, _mm256_div_ps(one, _mm256_add_ps(one, e)));
  }
  for (; i < n; ++i) y[i] = 1.f / (1.f + std::exp(-x[i]));
}

void a_sigmoid_bwd(const float* y, const float* dy, float* dx, int64_t n) {
  const __m256 one = _mm256_set1_ps(1.0f);
  int64_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 yv = _mm256_loadu_ps(y + i);
    const __m256 d = _mm256_mul_ps(yv, _mm256_sub_ps(one, yv));
    const __m256 dv = _mm256_loadu_ps(dx + i);
    _mm256_storeu_ps(dx + i, _mm256_fmadd_ps(_mm256_loadu_ps(dy + i), d, dv));
  }
  for (; i < n; ++i) dx[i] += dy[i] * y[i] * (1.f - y[i]);
}

void a_vexp(const float* x, float* y, int64_t n) {
  int64_t i = 0;
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(y + i, exp256(_mm256_loadu_ps(x + i)));
  for (; i < n; ++i) y[i] = std::exp(x[i]);
}

void a_axpy(float a, const float* x, float* y, int64_t n) {
  const __m256 av = _mm256_set1_ps(a);
  int64_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 yv = _mm256_loadu_ps(y + i);
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(av, _mm256_loadu_ps(x + i), yv));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void a_vscale(float a, float* x, int64_t n) {
  const __m256 av = _mm256_set1_ps(a);
  int64_t i = 0;
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(x + i, _mm256_mul_ps(av, _mm256_loadu_ps(x + i)));
  for (; i < n; ++i) x[i] *= a;
}

void a_vadd(const float* a, const float* b, float* c, int64_t n) {
  int64_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(c + i, _mm256_add_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) c[i] = a[i] + b[i];
}

void a_vsub(const float* a, const float* b, float* c, int64_t n) {
  int64_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(c + i, _mm256_sub_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) c[i] = a[i] - b[i];
}

void a_vmul(const float* a, const float* b, float* c, int64_t n) {
  int64_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(c + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) c[i] = a[i] * b[i];
}

double a_vsum(const float* x, int64_t n) {
  __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
  int64_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 xv = _mm256_loadu_ps(x + i);
    s0 = _mm256_add_pd(s0, _mm256_cvtps_pd(_mm256_castps256_ps128(xv)));
    s1 = _mm256_add_pd(s1, _mm256_cvtps_pd(_mm256_extractf128_ps(xv, 1)));
  }
  double s = hsum4d(_mm256_add_pd(s0, s1));
  for (; i < n; ++i) s += static_cast<double>(x[i]);
  return s;
}

double a_vdot(const float* a, const float* b, int64_t n) {
  __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
  int64_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 av = _mm256_loadu_ps(a + i);
    const __m256 bv = _mm256_loadu_ps(b + i);
    const __m256d lo = _mm256_mul_pd(_mm256_cvtps_pd(_mm256_castps256_ps128(av)),
                                     _mm256_cvtps_pd(_mm256_castps256_ps128(bv)));
    const __m256d hi = _mm256_mul_pd(_mm256_cvtps_pd(_mm256_extractf128_ps(av, 1)),
                                     _mm256_cvtps_pd(_mm256_extractf128_ps(bv, 1)));
    s0 = _mm256_add_pd(s0, lo);
    s1 = _mm256_add_pd(s1, hi);
  }
  double s = hsum4d(_mm256_add_pd(s0, s1));
  for (; i < n; ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

double a_sq_diff_sum(const float* a, const float* b, int64_t n) {
  __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
  int64_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 av = _mm256_loadu_ps(a + i);
    const __m256 bv = _mm256_loadu_ps(b + i);
    const __m256d lo = _mm256_sub_pd(_mm256_cvtps_pd(_mm256_castps256_ps128(av)),
                                     _mm256_cvtps_pd(_mm256_castps256_ps128(bv)));
    const __m256d hi = _mm256_sub_pd(_mm256_cvtps_pd(_mm256_extractf128_ps(av, 1)),
                                     _mm256_cvtps_pd(_mm256_extractf128_ps(bv, 1)));
    s0 = _mm256_fmadd_pd(lo, lo, s0);
    s1 = _mm256_fmadd_pd(hi, hi, s1);
  }
  double s = hsum4d(_mm256_add_pd(s0, s1));
  for (; i < n; ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s;
}

void a_adam_step(float* p, const float* g, float* m, float* v, int64_t n, float lr, float b1,
                 float b2, float eps, float inv_bc1, float inv_bc2) {
  const __m256 b1v = _mm256_set1_ps(b1), ob1 = _mm256_set1_ps(1.f - b1);
  const __m256 b2v = _mm256_set1_ps(b2), ob2 = _mm256_set1_ps(1.f - b2);
  const __m256 lrv = _mm256_set1_ps(lr), epsv = _mm256_set1_ps(eps);
  const __m256 ibc1 = _mm256_set1_ps(inv_bc1), ibc2 = _mm256_set1_ps(inv_bc2);
  int64_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 gv = _mm256_loadu_ps(g + i);
    __m256 mv = _mm256_fmadd_ps(b1v, _mm256_loadu_ps(m + i), _mm256_mul_ps(ob1, gv));
    __m256 vv = _mm256_fmadd_ps(b2v, _mm256_loadu_ps(v + i), _mm256_mul_ps(ob2, _mm256_mul_ps(gv, gv)));
    _mm256_storeu_ps(m + i, mv);
    _mm256_storeu_ps(v + i, vv);
    const __m256 mh = _mm256_mul_ps(mv, ibc1);
    const __m256 vh = _mm256_mul_ps(vv, ibc2);
    const __m256 den = _mm256_add_ps(_mm256_sqrt_ps(vh), epsv);
    const __m256 pv = _mm256_loadu_ps(p + i);
    _mm256_storeu_ps(p + i, _mm256_sub_ps(pv, _mm256_div_ps(_mm256_mul_ps(lrv, mh), den)));
  }
  for (; i < n; ++i) {
    m[i] = b1 * m[i] + (1.f - b1) * g[i];
    v[i] = b2 * v[i] + (1.f - b2) * g[i] * g[i];
    p[i] -= lr * (m[i] * inv_bc1) / (std::sqrt(v[i] * inv_bc2) + eps);
  }
}

}  // namespace

extern const Ops kAvx2Ops;
const Ops kAvx2Ops = {
    "avx2",       a_gemm_nn, a_gemm_nt,     a_gemm_tn, a_elu_fwd, a_elu_bwd,
    a_sigmoid_fwd, a_sigmoid_bwd, a_vexp,   a_axpy,    a_vscale,  a_vadd,
    a_vsub,       a_vmul,    a_vsum,        a_vdot,    a_sq_diff_sum, a_adam_step,
};

}  // namespace doors::kern

#endif  // x86_64
