#include "doors/kernels.hpp"

#if defined(__aarch64__)

#include <arm_neon.h>

namespace doors::kern {
namespace {

inline float hsum4(float32x4_t v) { return vaddvq_f32(v); }
inline double hsum2d(float64x2_t v) { return vaddvq_f64(v); }

// exp for 4 floats, same cephes-style polynomial as the AVX2 lane
inline float32x4_t exp128(float32x4_t x) {
  const float32x4_t exp_hi = vdupq_n_f32(88.3762626647950f);
  const float32x4_t exp_lo = vdupq_n_f32(-88.3762626647949f);
  const float32x4_t log2e = vdupq_n_f32(1.44269504088896341f);
  const float32x4_t c1 = vdupq_n_f32(0.693359375f);
  const float32x4_t c2 = vdupq_n_f32(-2.12194440e-4f);
  const float32x4_t one = vdupq_n_f32(1.0f);

  x = vminq_f32(vmaxq_f32(x, exp_lo), exp_hi);
  float32x4_t fx = vfmaq_f32(vdupq_n_f32(0.5f), x, log2e);
  fx = vrndmq_f32(fx);  // floor
  x = vfmsq_f32(x, fx, c1);
  x = vfmsq_f32(x, fx, c2);
  const float32x4_t z = vmulq_f32(x, x);
  float32x4_t y = vdupq_n_f32(1.9875691500e-4f);
  y = vfmaq_f32(vdupq_n_f32(1.3981999507e-3f), y, x);
  y = vfmaq_f32(vdupq_n_f32(8.3334519073e-3f), y, x);
  y = vfmaq_f32(vdupq_n_f32(4.1665795894e-2f), y, x);
  y = vfmaq_f32(vdupq_n_f32(1.6666665459e-1f), y, x);
  y = vfmaq_f32(vdupq_n_f32(5.0000001201e-1f), y, x);
  y = vfmaq_f32(vaddq_f32(x, one), y, z);
  int32x4_t n = vcvtq_s32_f32(fx);
  n = vaddq_s32(n, vdupq_n_s32(0x7f));
  n = vshlq_n_s32(n, 23);
  return vmulq_f32(y, vreinterpretq_f32_s32(n));
}

void n_gemm_nn(int M, int N, int K, const float* A, int lda, const float* B, int ldb, float* C,
               int ldc, bool acc) {
  const int NB = N & ~7;
  for (int i = 0; i < M; ++i) {
    const float* a = A + static_cast<size_t>(i) * lda;
    float* c = C + static_cast<size_t>(i) * ldc;
    for (int j = 0; j < NB; j += 8) {
      float32x4_t s0 = acc ? vld1q_f32(c + j) : vdupq_n_f32(0.f);
      float32x4_t s1 = acc ? vld1q_f32(c + j + 4) : vdupq_n_f32(0.f);
      for (int k = 0; k < K; ++k) {
        const float32x4_t av = vdupq_n_f32(a[k]);
        const float* b = B + static_cast<size_t>(k) * ldb + j;
        s0 = vfmaq_f32(s0, av, vld1q_f32(b));
        s1 = vfmaq_f32(s1, av, vld1q_f32(b + 4));
      }
      vst1q_f32(c + j, s0);
      vst1q_f32(c + j + 4, s1);
    }
    for (int j = NB; j < N; ++j) {
      float s = acc ? c[j] : 0.f;
      for (int k = 0; k < K; ++k) s += a[k] * B[static_cast<size_t>(k) * ldb + j];
      c[j] = s;
    }
  }
}

void n_gemm_nt(int M, int N, int K, const float* A, int lda, const float* B, int ldb, float* C,
               int ldc, bool acc) {
  const int KB = K & ~3;
  for (int i = 0; i < M; ++i) {
    const float* a = A + static_cast<size_t>(i) * lda;
    float* c = C + static_cast<size_t>(i) * ldc;
    for (int j = 0; j < N; ++j) {
      const float* b = B + static_cast<size_t>(j) * ldb;
      float32x4_t s = vdupq_n_f32(0.f);
      for (int k = 0; k < KB; k += 4) s = vfmaq_f32(s, vld1q_f32(a + k), vld1q_f32(b + k));
      float r = hsum4(s);
      for (int k = KB; k < K; ++k) r += a[k] * b[k];
      c[j] = acc ? c[j] + r : r;
    }
  }
}

void n_gemm_tn(int M, int N, int K, const float* A, int lda, const float* B, int ldb, float* C,
               int ldc, bool acc) {
  if (!acc) {
    for (int i = 0; i < M; ++i) {
      float* c = C + static_cast<size_t>(i) * ldc;
      for (int j = 0; j < N; ++j) c[j] = 0.f;
    }
  }
  const int NB = N & ~3;
  for (int k = 0; k < K; ++k) {
    const float* a = A + static_cast<size_t>(k) * lda;
    const float* b = B + static_cast<size_t>(k) * ldb;
    for (int i = 0; i < M; ++i) {
      const float32x4_t av = vdupq_n_f32(a[i]);
      float* c = C + static_cast<size_t>(i) * ldc;
      int j = 0;
      for (; j < NB; j += 4) vst1q_f32(c + j, vfmaq_f32(vld1q_f32(c + j), av, vld1q_f32(b + j)));
      for (; j < N; ++j) c[j] += a[i] * b[j];
    }
  }
}

void n_elu_fwd(const float* x, float* y, int64_t n) {
  const float32x4_t one = vdupq_n_f32(1.0f);
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float32x4_t xv = vld1q_f32(x + i);
    const float32x4_t neg = vsubq_f32(exp128(xv), one);
    const uint32x4_t mask = vcgtq_f32(xv, vdupq_n_f32(0.f));
    vst1q_f32(y + i, vbslq_f32(mask, xv, neg));
  }
  for (; i < n; ++i) y[i] = x[i] > 0.f ? x[i] : std::expm1(x[i]);
}

void n_elu_bwd(const float* x, const float* y, const float* dy, float* dx, int64_t n) {
  const float32x4_t one = vdupq_n_f32(1.0f);
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float32x4_t xv = vld1q_f32(x + i);
    const float32x4_t yv = vld1q_f32(y + i);
    const uint32x4_t mask = vcgtq_f32(xv, vdupq_n_f32(0.f));
    const float32x4_t d = vbslq_f32(mask, one, vaddq_f32(yv, one));
    vst1q_f32(dx + i, vfmaq_f32(vld1q_f32(dx + i), vld1q_f32(dy + i), d));
  }
  for (; i < n; ++i) dx[i] += dy[i] * (x[i] > 0.f ? 1.f : y[i] + 1.f);
}

void n_sigmoid_fwd(const float* x, float* y, int64_t n) {
  const float32x4_t one = vdupq_n_f32(1.0f);
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float32x4_t e = exp128(vnegq_f32(vld1q_f32(x + i)));
    vst1q_f32(y + i, vdivq_f32(one, vaddq_f32(one, e)));
  }
  for (; i < n; ++i) y[i] = 1.f / (1.f + std::exp(-x[i]));
}

void n_sigmoid_bwd(const float* y, const float* dy, float* dx, int64_t n) {
  const float32x4_t one = vdupq_n_f32(1.0f);
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float32x4_t yv = vld1q_f32(y + i);
    const float32x4_t d = vmulq_f32(yv, vsubq_f32(one, yv));
    vst1q_f32(dx + i, vfmaq_f32(vld1q_f32(dx + i), vld1q_f32(dy + i), d));
  }
  for (; i < n; ++i) dx[i] += dy[i] * y[i] * (1.f - y[i]);
}

void n_vexp(const float* x, float* y, int64_t n) {
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(y + i, exp128(vld1q_f32(x + i)));
  for (; i < n; ++i) y[i] = std::exp(x[i]);
}

void n_axpy(float a, const float* x, float* y, int64_t n) {
  const float32x4_t av = vdupq_n_f32(a);
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(y + i, vfmaq_f32(vld1q_f32(y + i), av, vld1q_f32(x + i)));
  for (; i < n; ++i) y[i] += a * x[i];
}

void n_vscale(float a, float* x, int64_t n) {
  const float32x4_t av = vdupq_n_f32(a);
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(x + i, vmulq_f32(av, vld1q_f32(x + i)));
  for (; i < n; ++i) x[i] *= a;
}

void n_vadd(const float* a, const float* b, float* c, int64_t n) {
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(c + i, vaddq_f32(vld1q_f32(a + i), vld1q_f32(b + i)));
  for (; i < n; ++i) c[i] = a[i] + b[i];
}

void n_vsub(const float* a, const float* b, float* c, int64_t n) {
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(c + i, vsubq_f32(vld1q_f32(a + i), vld1q_f32(b + i)));
  for (; i < n; ++i) c[i] = a[i] - b[i];
}

void n_vmul(const float* a, const float* b, float* c, int64_t n) {
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(c + i, vmulq_f32(vld1q_f32(a + i), vld1q_f32(b + i)));
  for (; i < n; ++i) c[i] = a[i] * b[i];
}

double n_vsum(const float* x, int64_t n) {
  float64x2_t s0 = vdupq_n_f64(0.0), s1 = vdupq_n_f64(0.0);
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float32x4_t xv = vld1q_f32(x + i);
    s0 = vaddq_f64(s0, vcvt_f64_f32(vget_low_f32(xv)));
    s1 = vaddq_f64(s1, vcvt_f64_f32(vget_high_f32(xv)));
  }
  double s = hsum2d(vaddq_f64(s0, s1));
  for (; i < n; ++i) s += static_cast<double>(x[i]);
  return s;
}

double n_vdot(const float* a, const float* b, int64_t n) {
  float64x2_t s0 = vdupq_n_f64(0.0), s1 = vdupq_n_f64(0.0);
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float32x4_t av = vld1q_f32(a + i);
    const float32x4_t bv = vld1q_f32(b + i);
    s0 = vfmaq_f64(s0, vcvt_f64_f32(vget_low_f32(av)), vcvt_f64_f32(vget_low_f32(bv)));
    s1 = vfmaq_f64(s1, vcvt_f64_f32(vget_high_f32(av)), vcvt_f64_f32(vget_high_f32(bv)));
  }
  double s = hsum2d(vaddq_f64(s0, s1));
  for (; i < n; ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

double n_sq_diff_sum(const float* a, const float* b, int64_t n) {
  float64x2_t s0 = vdupq_n_f64(0.0), s1 = vdupq_n_f64(0.0);
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float32x4_t av = vld1q_f32(a + i);
    const float32x4_t bv = vld1q_f32(b + i);
    const float64x2_t lo =
        vsubq_f64(vcvt_f64_f32(vget_low_f32(av)), vcvt_f64_f32(vget_low_f32(bv)));
    const float64x2_t hi =
        vsubq_f64(vcvt_f64_f32(vget_high_f32(av)), vcvt_f64_f32(vget_high_f32(bv)));
    s0 = vfmaq_f64(s0, lo, lo);
    s1 = vfmaq_f64(s1, hi, hi);
  }
  double s = hsum2d(vaddq_f64(s0, s1));
  for (; i < n; ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s;
}

void n_adam_step(float* p, const float* g, float* m, float* v, int64_t n, float lr, float b1,
                 float b2, float eps, float inv_bc1, float inv_bc2) {
  const float32x4_t b1v = vdupq_n_f32(b1), ob1 = vdupq_n_f32(1.f - b1);
  const float32x4_t b2v = vdupq_n_f32(b2), ob2 = vdupq_n_f32(1.f - b2);
  const float32x4_t lrv = vdupq_n_f32(lr), epsv = vdupq_n_f32(eps);
  const float32x4_t ibc1 = vdupq_n_f32(inv_bc1), ibc2 = vdupq_n_f32(inv_bc2);
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float32x4_t gv = vld1q_f32(g + i);
    float32x4_t mv = vfmaq_f32(vmulq_f32(ob1, gv), b1v, vld1q_f32(m + i));
    float32x4_t vv = vfmaq_f32(vmulq_f32(ob2, vmulq_f32(gv, gv)), b2v, vld1q_f32(v + i));
    vst1q_f32(m + i, mv);
    vst1q_f32(v + i, vv);
    const float32x4_t mh = vmulq_f32(mv, ibc1);
    const float32x4_t den = vaddq_f32(vsqrtq_f32(vmulq_f32(vv, ibc2)), epsv);
    vst1q_f32(p + i, vsubq_f32(vld1q_f32(p + i), vdivq_f32(vmulq_f32(lrv, mh), den)));
  }
  for (; i < n; ++i) {
    m[i] = b1 * m[i] + (1.f - b1) * g[i];
    v[i] = b2 * v[i] + (1.f - b2) * g[i] * g[i];
    p[i] -= lr * (m[i] * inv_bc1) / (std::sqrt(v[i] * inv_bc2) + eps);
  }
}

}  // namespace

extern const Ops kNeonOps;
const Ops kNeonOps = {
    "neon",       n_gemm_nn, n_gemm_nt,     n_gemm_tn, n_elu_fwd, n_elu_bwd,
    n_sigmoid_fwd, n_sigmoid_bwd, n_vexp,   n_axpy,    n_vscale,  n_vadd,
    n_vsub,       n_vmul,    n_vsum,        n_vdot,    n_sq_diff_sum, n_adam_step,
};

}  // namespace doors::kern

#endif  // __aarch64__
