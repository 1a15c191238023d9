#pragma once

#include <cstdint>

#include "fef/common.hpp"

namespace fef::kernels {

// Hot inner loops on contiguous real_t spans. Every entry has a scalar
// reference implementation and may have SIMD variants (AVX2 on x86-64,
// NEON on aarch64) selected once at startup from CPU features.
//
// Elementwise entries (add/sub/mul/scale/axpy/addmul/cmul) perform the same
// per-element operation sequence in every backend, so their results are
// bit-identical to the scalar reference. Reductions (dot/sum/max) use lane
// accumulators and differ from scalar only by summation order.
struct Ops {
  void (*add)(real_t* dst, const real_t* a, const real_t* b, int64_t n);
  void (*sub)(real_t* dst, const real_t* a, const real_t* b, int64_t n);
  void (*mul)(real_t* dst, const real_t* a, const real_t* b, int64_t n);
  // dst = a * s
  void (*scale)(real_t* dst, const real_t* a, real_t s, int64_t n);
  // dst += a * x
  void (*axpy)(real_t* dst, real_t a, const real_t* x, int64_t n);
  // dst += a ⊙ b
  void (*addmul)(real_t* dst, const real_t* a, const real_t* b, int64_t n);
  real_t (*dot)(const real_t* a, const real_t* b, int64_t n);
  real_t (*sum)(const real_t* a, int64_t n);
  // pointwise complex product on split re/im planes; c may not alias a or b
  void (*cmul)(real_t* cre, real_t* cim, const real_t* are, const real_t* aim,
               const real_t* bre, const real_t* bim, int64_t n);
  const char* name;
};

const Ops& scalar_ops();

// Dispatched table (resolved on first use).
const Ops& ops();

const char* active_backend();

// Test hook: force a specific backend ("scalar", "avx2", "neon").
// Throws if the backend is unavailable on this machine.
void force_backend(const char* name);
void reset_backend();

}  // namespace fef::kernels
