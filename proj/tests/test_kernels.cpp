#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "doors/kernels.hpp"
#include "doors/rng.hpp"

using namespace doors;

namespace {

std::vector<float> random_vec(size_t n, Rng& rng, float scale = 1.f) {
  std::vector<float> v(n);
  for (auto& x : v) x = scale * rng.normal_f();
  return v;
}

// double-precision naive oracle for all three gemm orientations
void gemm_oracle(char mode, int M, int N, int K, const std::vector<float>& A,
                 const std::vector<float>& B, std::vector<float>& C, bool acc) {
  std::vector<double> out(static_cast<size_t>(M) * N, 0.0);
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < N; ++j) {
      double s = acc ? C[static_cast<size_t>(i) * N + j] : 0.0;
      for (int k = 0; k < K; ++k) {
        double a, b;
        if (mode == 'n') {  // nn
          a = A[static_cast<size_t>(i) * K + k];
          b = B[static_cast<size_t>(k) * N + j];
        } else if (mode == 't') {  // nt: B is [N,K]
          a = A[static_cast<size_t>(i) * K + k];
          b = B[static_cast<size_t>(j) * K + k];
        } else {  // tn: A is [K,M]
          a = A[static_cast<size_t>(k) * M + i];
          b = B[static_cast<size_t>(k) * N + j];
        }
        s += a * b;
      }
      out[static_cast<size_t>(i) * N + j] = s;
    }
  for (size_t i = 0; i < out.size(); ++i) C[i] = static_cast<float>(out[i]);
}

void check_close(const std::vector<float>& got, const std::vector<float>& want, double tol) {
  REQUIRE(got.size() == want.size());
  for (size_t i = 0; i < got.size(); ++i) {
    const double scale = 1.0 + std::abs(static_cast<double>(want[i]));
    REQUIRE(std::abs(static_cast<double>(got[i]) - want[i]) < tol * scale);
  }
}

}  // namespace

TEST_CASE("gemm variants match a naive double oracle") {
  Rng rng(1);
  const int shapes[][3] = {{1, 1, 1},   {3, 5, 7},    {4, 16, 27},  {17, 33, 9},
                           {80, 32, 27}, {5, 1000, 512}, {13, 24, 100}, {2, 7, 2304}};
  for (const kern::Ops* ops : kern::available()) {
    for (auto& sh : shapes) {
      const int M = sh[0], N = sh[1], K = sh[2];
      for (bool acc : {false, true}) {
        auto A = random_vec(static_cast<size_t>(M) * K, rng);
        auto B = random_vec(static_cast<size_t>(K) * N, rng);
        auto At = random_vec(static_cast<size_t>(K) * M, rng);
        auto Bt = random_vec(static_cast<size_t>(N) * K, rng);
        auto C0 = random_vec(static_cast<size_t>(M) * N, rng);

        auto want = C0, got = C0;
        gemm_oracle('n', M, N, K, A, B, want, acc);
        ops->sgemm_nn(M, N, K, A.data(), K, B.data(), N, got.data(), N, acc);
        check_close(got, want, 2e-5 * std::sqrt(static_cast<double>(K)));

        want = C0;
        got = C0;
        gemm_oracle('t', M, N, K, A, Bt, want, acc);
        ops->sgemm_nt(M, N, K, A.data(), K, Bt.data(), K, got.data(), N, acc);
        check_close(got, want, 2e-5 * std::sqrt(static_cast<double>(K)));

        want = C0;
        got = C0;
        gemm_oracle('m', M, N, K, At, B, want, acc);
        ops->sgemm_tn(M, N, K, At.data(), M, B.data(), N, got.data(), N, acc);
        check_close(got, want, 2e-5 * std::sqrt(static_cast<double>(K)));
      }
    }
  }
}

TEST_CASE("simd lanes agree with the scalar reference") {
  Rng rng(2);
  const auto& ref = kern::scalar_ops();
  for (const kern::Ops* ops : kern::available()) {
    INFO("lane: " << ops->name);
    const int64_t n = 1001;  // odd length exercises the tail paths
    auto x = random_vec(n, rng, 3.f);
    auto y = random_vec(n, rng);
    auto dy = random_vec(n, rng);

    std::vector<float> a1(n), a2(n);
    ref.elu_fwd(x.data(), a1.data(), n);
    ops->elu_fwd(x.data(), a2.data(), n);
    check_close(a2, a1, 2e-6);

    std::vector<float> d1(n, 0.5f), d2(n, 0.5f);
    ref.elu_bwd(x.data(), a1.data(), dy.data(), d1.data(), n);
    ops->elu_bwd(x.data(), a1.data(), dy.data(), d2.data(), n);
    check_close(d2, d1, 2e-6);

    ref.sigmoid_fwd(x.data(), a1.data(), n);
    ops->sigmoid_fwd(x.data(), a2.data(), n);
    check_close(a2, a1, 2e-6);

    std::fill(d1.begin(), d1.end(), 0.f);
    std::fill(d2.begin(), d2.end(), 0.f);
    ref.sigmoid_bwd(a1.data(), dy.data(), d1.data(), n);
    ops->sigmoid_bwd(a1.data(), dy.data(), d2.data(), n);
    check_close(d2, d1, 2e-6);

    ref.vexp(x.data(), a1.data(), n);
    ops->vexp(x.data(), a2.data(), n);
    check_close(a2, a1, 2e-6);

    a1 = y;
    a2 = y;
    ref.axpy(0.37f, x.data(), a1.data(), n);
    ops->axpy(0.37f, x.data(), a2.data(), n);
    check_close(a2, a1, 1e-7);

    ref.vsub(x.data(), y.data(), a1.data(), n);
    ops->vsub(x.data(), y.data(), a2.data(), n);
    check_close(a2, a1, 0.0 + 1e-9);

    ref.vmul(x.data(), y.data(), a1.data(), n);
    ops->vmul(x.data(), y.data(), a2.data(), n);
    check_close(a2, a1, 1e-9);

    CHECK(std::abs(ref.vsum(x.data(), n) - ops->vsum(x.data(), n)) < 1e-9);
    CHECK(std::abs(ref.vdot(x.data(), y.data(), n) - ops->vdot(x.data(), y.data(), n)) < 1e-9);
    CHECK(std::abs(ref.sq_diff_sum(x.data(), y.data(), n) - ops->sq_diff_sum(x.data(), y.data(), n)) <
          1e-9);
  }
}

TEST_CASE("adam step equivalence across lanes") {
  Rng rng(3);
  const int64_t n = 333;
  auto p0 = random_vec(n, rng);
  auto g = random_vec(n, rng);
  auto m0 = random_vec(n, rng, 0.1f);
  std::vector<float> v0(n);
  for (auto& v : v0) v = std::abs(rng.normal_f()) * 0.1f;

  const auto& ref = kern::scalar_ops();
  for (const kern::Ops* ops : kern::available()) {
    auto p1 = p0, m1 = m0, v1 = v0;
    auto p2 = p0, m2 = m0, v2 = v0;
    ref.adam_step(p1.data(), g.data(), m1.data(), v1.data(), n, 1e-3f, 0.9f, 0.999f, 1e-8f, 1.1f,
                  1.05f);
    ops->adam_step(p2.data(), g.data(), m2.data(), v2.data(), n, 1e-3f, 0.9f, 0.999f, 1e-8f, 1.1f,
                   1.05f);
    check_close(p2, p1, 1e-6);
    check_close(m2, m1, 1e-6);
    check_close(v2, v1, 1e-6);
  }
}

TEST_CASE("vexp is accurate across the useful range") {
  for (const kern::Ops* ops : kern::available()) {
    std::vector<float> x, y;
    for (float v = -86.f; v <= 86.f; v += 0.37f) x.push_back(v);
    y.resize(x.size());
    ops->vexp(x.data(), y.data(), static_cast<int64_t>(x.size()));
    for (size_t i = 0; i < x.size(); ++i) {
      const double want = std::exp(static_cast<double>(x[i]));
      REQUIRE(std::abs(y[i] - want) <= 2e-6 * want);
    }
  }
}

TEST_CASE("kernel selection can be forced to scalar") {
  const char* prev = kern::active().name;
  REQUIRE(kern::select("scalar"));
  CHECK(std::string(kern::active().name) == "scalar");
  CHECK_FALSE(kern::select("no-such-lane"));
  kern::select(prev);
}
