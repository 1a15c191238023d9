#include "fef/kernels.hpp"

#if defined(__aarch64__) && !defined(FEF_REAL32)

#include <arm_neon.h>

namespace fef::kernels {

namespace {

void v_add(double* dst, const double* a, const double* b, int64_t n) {
  int64_t i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(dst + i, vaddq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  for (; i < n; ++i) dst[i] = a[i] + b[i];
}
void v_sub(double* dst, const double* a, const double* b, int64_t n) {
  int64_t i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(dst + i, vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  for (; i < n; ++i) dst[i] = a[i] - b[i];
}
void v_mul(double* dst, const double* a, const double* b, int64_t n) {
  int64_t i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(dst + i, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  for (; i < n; ++i) dst[i] = a[i] * b[i];
}
void v_scale(double* dst, const double* a, double s, int64_t n) {
  float64x2_t vs = vdupq_n_f64(s);
  int64_t i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(dst + i, vmulq_f64(vld1q_f64(a + i), vs));
  for (; i < n; ++i) dst[i] = a[i] * s;
}
void v_axpy(double* dst, double a, const double* x, int64_t n) {
  float64x2_t va = vdupq_n_f64(a);
  int64_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t p = vmulq_f64(va, vld1q_f64(x + i));
    vst1q_f64(dst + i, vaddq_f64(vld1q_f64(dst + i), p));
  }
  for (; i < n; ++i) dst[i] += a * x[i];
}
void v_addmul(double* dst, const double* a, const double* b, int64_t n) {
  int64_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t p = vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i));
    vst1q_f64(dst + i, vaddq_f64(vld1q_f64(dst + i), p));
  }
  for (; i < n; ++i) dst[i] += a[i] * b[i];
}
double v_dot(const double* a, const double* b, int64_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  int64_t i = 0;
  for (; i + 2 <= n; i += 2)
    acc = vaddq_f64(acc, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  double r = vgetq_lane_f64(acc, 0) + vgetq_lane_f64(acc, 1);
  for (; i < n; ++i) r += a[i] * b[i];
  return r;
}
double v_sum(const double* a, int64_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  int64_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vld1q_f64(a + i));
  double r = vgetq_lane_f64(acc, 0) + vgetq_lane_f64(acc, 1);
  for (; i < n; ++i) r += a[i];
  return r;
}
void v_cmul(double* cre, double* cim, const double* are, const double* aim,
            const double* bre, const double* bim, int64_t n) {
  int64_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t ar = vld1q_f64(are + i), ai = vld1q_f64(aim + i);
    float64x2_t br = vld1q_f64(bre + i), bi = vld1q_f64(bim + i);
    vst1q_f64(cre + i, vsubq_f64(vmulq_f64(ar, br), vmulq_f64(ai, bi)));
    vst1q_f64(cim + i, vaddq_f64(vmulq_f64(ar, bi), vmulq_f64(ai, br)));
  }
  for (; i < n; ++i) {
    cre[i] = are[i] * bre[i] - aim[i] * bim[i];
    cim[i] = are[i] * bim[i] + aim[i] * bre[i];
  }
}

}  // namespace

const Ops* neon_ops() {
  static const Ops t{v_add,    v_sub, v_mul, v_scale, v_axpy,
                     v_addmul, v_dot, v_sum, v_cmul,  "neon"};
  return &t;
}

}  // namespace fef::kernels

#else

namespace fef::kernels {
const Ops* neon_ops() { return nullptr; }
}  // namespace fef::kernels

#endif
