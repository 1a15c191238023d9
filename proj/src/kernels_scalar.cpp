#include "fef/kernels.hpp"

namespace fef::kernels {

namespace {

void s_add(real_t* dst, const real_t* a, const real_t* b, int64_t n) {
  for (int64_t i = 0; i < n; ++i) dst[i] = a[i] + b[i];
}
void s_sub(real_t* dst, const real_t* a, const real_t* b, int64_t n) {
  for (int64_t i = 0; i < n; ++i) dst[i] = a[i] - b[i];
}
void s_mul(real_t* dst, const real_t* a, const real_t* b, int64_t n) {
  for (int64_t i = 0; i < n; ++i) dst[i] = a[i] * b[i];
}
void s_scale(real_t* dst, const real_t* a, real_t s, int64_t n) {
  for (int64_t i = 0; i < n; ++i) dst[i] = a[i] * s;
}
void s_axpy(real_t* dst, real_t a, const real_t* x, int64_t n) {
  for (int64_t i = 0; i < n; ++i) dst[i] += a * x[i];
}
void s_addmul(real_t* dst, const real_t* a, const real_t* b, int64_t n) {
  for (int64_t i = 0; i < n; ++i) dst[i] += a[i] * b[i];
}
real_t s_dot(const real_t* a, const real_t* b, int64_t n) {
  real_t acc = 0;
  for (int64_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}
real_t s_sum(const real_t* a, int64_t n) {
  real_t acc = 0;
  for (int64_t i = 0; i < n; ++i) acc += a[i];
  return acc;
}
void s_cmul(real_t* cre, real_t* cim, const real_t* are, const real_t* aim,
            const real_t* bre, const real_t* bim, int64_t n) {
  for (int64_t i = 0; i < n; ++i) {
    cre[i] = are[i] * bre[i] - aim[i] * bim[i];
    cim[i] = are[i] * bim[i] + aim[i] * bre[i];
  }
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops t{s_add,    s_sub, s_mul, s_scale, s_axpy,
                     s_addmul, s_dot, s_sum, s_cmul,  "scalar"};
  return t;
}

}  // namespace fef::kernels
