#include "doors/kernels.hpp"

namespace doors::kern {

// Scalar reference lane: thin wrappers over the templated loops. Kept free of
// compiler-specific vectorization flags so reduction order is the written one.
namespace {

void s_gemm_nn(int M, int N, int K, const float* A, int lda, const float* B, int ldb, float* C,
               int ldc, bool acc) {
  ref::gemm_nn<float>(M, N, K, A, lda, B, ldb, C, ldc, acc);
}
void s_gemm_nt(int M, int N, int K, const float* A, int lda, const float* B, int ldb, float* C,
               int ldc, bool acc) {
  ref::gemm_nt<float>(M, N, K, A, lda, B, ldb, C, ldc, acc);
}
void s_gemm_tn(int M, int N, int K, const float* A, int lda, const float* B, int ldb, float* C,
               int ldc, bool acc) {
  ref::gemm_tn<float>(M, N, K, A, lda, B, ldb, C, ldc, acc);
}
void s_elu_fwd(const float* x, float* y, int64_t n) { ref::elu_fwd<float>(x, y, n); }
void s_elu_bwd(const float* x, const float* y, const float* dy, float* dx, int64_t n) {
  ref::elu_bwd<float>(x, y, dy, dx, n);
}
void s_sigmoid_fwd(const float* x, float* y, int64_t n) { ref::sigmoid_fwd<float>(x, y, n); }
void s_sigmoid_bwd(const float* y, const float* dy, float* dx, int64_t n) {
  ref::sigmoid_bwd<float>(y, dy, dx, n);
}
void s_vexp(const float* x, float* y, int64_t n) { ref::vexp<float>(x, y, n); }
void s_axpy(float a, const float* x, float* y, int64_t n) { ref::axpy<float>(a, x, y, n); }
void s_vscale(float a, float* x, int64_t n) { ref::vscale<float>(a, x, n); }
void s_vadd(const float* a, const float* b, float* c, int64_t n) { ref::vadd<float>(a, b, c, n); }
void s_vsub(const float* a, const float* b, float* c, int64_t n) { ref::vsub<float>(a, b, c, n); }
void s_vmul(const float* a, const float* b, float* c, int64_t n) { ref::vmul<float>(a, b, c, n); }
double s_vsum(const float* x, int64_t n) { return ref::vsum<float>(x, n); }
double s_vdot(const float* a, const float* b, int64_t n) { return ref::vdot<float>(a, b, n); }
double s_sq_diff_sum(const float* a, const float* b, int64_t n) {
  return ref::sq_diff_sum<float>(a, b, n);
}
void s_adam_step(float* p, const float* g, float* m, float* v, int64_t n, float lr, float b1,
                 float b2, float eps, float inv_bc1, float inv_bc2) {
  ref::adam_step<float>(p, g, m, v, n, lr, b1, b2, eps, inv_bc1, inv_bc2);
}

}  // namespace

extern const Ops kScalarOps;
const Ops kScalarOps = {
    "scalar",    s_gemm_nn, s_gemm_nt,     s_gemm_tn, s_elu_fwd, s_elu_bwd,
    s_sigmoid_fwd, s_sigmoid_bwd, s_vexp,  s_axpy,    s_vscale,  s_vadd,
    s_vsub,      s_vmul,    s_vsum,        s_vdot,    s_sq_diff_sum, s_adam_step,
};

}  // namespace doors::kern
