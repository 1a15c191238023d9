#pragma once

#include <array>
#include <limits>

#include "fef/ops.hpp"
#include "fef/tensor.hpp"

namespace fef {

// ---------------------------------------------------------------------------
// 3D discrete Fourier transform over the trailing three axes, batched over
// leading axes. Unnormalized forward; inverse carries the 1/(D·H·W) factor.
// Extents must factor into 2, 3 and 5.
// ---------------------------------------------------------------------------

bool fft_extent_supported(int64_t n);

// Forward transform of a real tensor. Differentiable: the gradient of the
// forward FFT is the real plane of the unnormalized inverse transform of the
// upstream complex gradient (treating re/im as independent real channels);
// this is the single source of truth for the convention, fixed so central
// finite differences agree.
ComplexTensor fft3(const Tensor& x);

// Normalized inverse; returns the real plane. max_imag_abs (optional out)
// receives the largest |imaginary| component; rel_imag receives it relative
// to the largest |real| component. If rel_tol is finite and the relative
// residue exceeds it, throws. Differentiable w.r.t. both input planes.
Tensor ifft3_real(const ComplexTensor& s, double* max_imag_abs = nullptr,
                  double* rel_imag = nullptr,
                  double rel_tol = std::numeric_limits<double>::infinity());

// Non-differentiating full complex inverse (test/analysis use).
ComplexTensor ifft3_full(const ComplexTensor& s);

// Pointwise complex product and modulus, differentiable.
ComplexTensor complex_mul(const ComplexTensor& a, const ComplexTensor& b);
Tensor complex_abs(const ComplexTensor& a);

// ---------------------------------------------------------------------------
// Hard radial partition of the spectrum grid into low/mid/high bands.
// Masks live on the unshifted FFT grid; r is the normalized radius
// ‖(f_d/0.5, f_h/0.5, f_w/0.5)‖₂/√3 with f the signed normalized frequency
// in [-0.5, 0.5). low: r <= r1, mid: r1 < r <= r2, high: r > r2.
// ---------------------------------------------------------------------------

struct BandMasks {
  Tensor low, mid, high;  // (D,H,W), values in {0,1}, constant
  double r1 = 0, r2 = 0;
  int64_t low_count = 0, mid_count = 0, high_count = 0;
};

BandMasks band_masks(const Shape& extents, double r1, double r2);

// Elementwise masked copies; their sum reproduces the input bitwise.
std::array<ComplexTensor, 3> band_decompose(const ComplexTensor& s,
                                            const BandMasks& m);

// ---------------------------------------------------------------------------
// Orthonormal separable 3D Haar analysis/synthesis. Pairwise (a+b)/√2 and
// (a-b)/√2 along W, then H, then D; even extents required. Subband keys use
// letter order (D,H,W), so LLH is high along W.
// ---------------------------------------------------------------------------

constexpr const char* kSubbandNames[8] = {"LLL", "LLH", "LHL", "LHH",
                                          "HLL", "HLH", "HHL", "HHH"};

struct SubbandSet {
  std::array<Tensor, 8> bands;  // index = (d_high<<2)|(h_high<<1)|w_high
  Shape source_shape;
};

SubbandSet dwt3_haar(const Tensor& x);
Tensor idwt3_haar(const SubbandSet& s);

// Test hook for the negative control in the property runner: flips the sign
// of the detail coefficient in the analysis step only, which must break the
// round-trip property.
void set_haar_detail_sign_flipped(bool flipped);

}  // namespace fef
