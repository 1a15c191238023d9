#include "fef/kernels.hpp"

#if defined(__x86_64__) && !defined(FEF_REAL32)

#include <immintrin.h>

// Each loop does the identical per-element op sequence as the scalar
// reference (independent mul/add, no FMA contraction), so elementwise
// results stay bit-identical across backends. Reductions accumulate in
// four lanes and combine at the end.

namespace fef::kernels {

namespace {

__attribute__((target("avx2"))) void v_add(double* dst, const double* a,
                                           const double* b, int64_t n) {
  int64_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(dst + i, _mm256_add_pd(_mm256_loadu_pd(a + i),
                                            _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) dst[i] = a[i] + b[i];
}

__attribute__((target("avx2"))) void v_sub(double* dst, const double* a,
                                           const double* b, int64_t n) {
  int64_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(dst + i, _mm256_sub_pd(_mm256_loadu_pd(a + i),
                                            _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) dst[i] = a[i] - b[i];
}

__attribute__((target("avx2"))) void v_mul(double* dst, const double* a,
                                           const double* b, int64_t n) {
  int64_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(dst + i, _mm256_mul_pd(_mm256_loadu_pd(a + i),
                                            _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) dst[i] = a[i] * b[i];
}

__attribute__((target("avx2"))) void v_scale(double* dst, const double* a,
                                             double s, int64_t n) {
  __m256d vs = _mm256_set1_pd(s);
  int64_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(dst + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), vs));
  for (; i < n; ++i) dst[i] = a[i] * s;
}

__attribute__((target("avx2"))) void v_axpy(double* dst, double a,
                                            const double* x, int64_t n) {
  __m256d va = _mm256_set1_pd(a);
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d d = _mm256_loadu_pd(dst + i);
    __m256d p = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(dst + i, _mm256_add_pd(d, p));
  }
  for (; i < n; ++i) dst[i] += a * x[i];
}

__attribute__((target("avx2"))) void v_addmul(double* dst, const double* a,
                                              const double* b, int64_t n) {
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d d = _mm256_loadu_pd(dst + i);
    __m256d p =
        _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    _mm256_storeu_pd(dst + i, _mm256_add_pd(d, p));
  }
  for (; i < n; ++i) dst[i] += a[i] * b[i];
}

__attribute__((target("avx2"))) double v_dot(const double* a, const double* b,
                                             int64_t n) {
  __m256d acc = _mm256_setzero_pd();
  int64_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_add_pd(
        acc, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double r = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < n; ++i) r += a[i] * b[i];
  return r;
}

__attribute__((target("avx2"))) double v_sum(const double* a, int64_t n) {
  __m256d acc = _mm256_setzero_pd();
  int64_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double r = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < n; ++i) r += a[i];
  return r;
}

__attribute__((target("avx2"))) void v_cmul(double* cre, double* cim,
                                            const double* are,
                                            const double* aim,
                                            const double* bre,
                                            const double* bim, int64_t n) {
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d ar = _mm256_loadu_pd(are + i), ai = _mm256_loadu_pd(aim + i);
    __m256d br = _mm256_loadu_pd(bre + i), bi = _mm256_loadu_pd(bim + i);
    _mm256_storeu_pd(
        cre + i, _mm256_sub_pd(_mm256_mul_pd(ar, br), _mm256_mul_pd(ai, bi)));
    _mm256_storeu_pd(
        cim + i, _mm256_add_pd(_mm256_mul_pd(ar, bi), _mm256_mul_pd(ai, br)));
  }
  for (; i < n; ++i) {
    cre[i] = are[i] * bre[i] - aim[i] * bim[i];
    cim[i] = are[i] * bim[i] + aim[i] * bre[i];
  }
}

}  // namespace

const Ops* avx2_ops() {
  static const Ops t{v_add,    v_sub, v_mul, v_scale, v_axpy,
                     v_addmul, v_dot, v_sum, v_cmul,  "avx2"};
  return &t;
}

}  // namespace fef::kernels

#else

namespace fef::kernels {
const Ops* avx2_ops() { return nullptr; }
}  // namespace fef::kernels

#endif
