#include <cmath>

#include "fef/kernels.hpp"
#include "fef/spectral.hpp"

namespace fef {

namespace {

const real_t kInvSqrt2 = static_cast<real_t>(0.70710678118654752440);

bool g_detail_sign_flipped = false;

struct DwtDims {
  int64_t batch, d, h, w;
};

DwtDims dwt_dims(const Shape& s) {
  FEF_CHECK(s.size() >= 3, "dwt3: want at least 3 axes, got ", shape_str(s));
  DwtDims e;
  e.w = s[s.size() - 1];
  e.h = s[s.size() - 2];
  e.d = s[s.size() - 3];
  FEF_CHECK(e.d % 2 == 0 && e.h % 2 == 0 && e.w % 2 == 0,
            "dwt3: odd spatial extent in ", shape_str(s));
  e.batch = 1;
  for (size_t i = 0; i + 3 < s.size(); ++i) e.batch *= s[i];
  return e;
}

// One separable analysis level on a packed (batch, D, H, W) volume. The 8
// half-resolution bands are written to out[(d_hi<<2)|(h_hi<<1)|w_hi].
void dwt3_core(const Shape& shape, const real_t* src, real_t* out[8],
               real_t detail_sign) {
  DwtDims e = dwt_dims(shape);
  int64_t d2 = e.d / 2, h2 = e.h / 2, w2 = e.w / 2;
  int64_t vol = e.d * e.h * e.w, bvol = d2 * h2 * w2;
  std::vector<real_t> a(vol), b(vol);
  for (int64_t bt = 0; bt < e.batch; ++bt) {
    const real_t* x = src + bt * vol;
    // along W: a holds (D,H,2,W/2) order (lo plane then hi plane per row)
    for (int64_t dh = 0; dh < e.d * e.h; ++dh) {
      const real_t* row = x + dh * e.w;
      real_t* lo = a.data() + dh * e.w;
      real_t* hi = lo + w2;
      for (int64_t i = 0; i < w2; ++i) {
        lo[i] = (row[2 * i] + row[2 * i + 1]) * kInvSqrt2;
        hi[i] = (row[2 * i] - row[2 * i + 1]) * kInvSqrt2 * detail_sign;
      }
    }
    // along H: rows of length e.w in a, paired over h
    for (int64_t id = 0; id < e.d; ++id) {
      for (int64_t ih = 0; ih < h2; ++ih) {
        const real_t* r0 = a.data() + (id * e.h + 2 * ih) * e.w;
        const real_t* r1 = r0 + e.w;
        real_t* lo = b.data() + (id * e.h + ih) * e.w;
        real_t* hi = b.data() + (id * e.h + h2 + ih) * e.w;
        for (int64_t i = 0; i < e.w; ++i) {
          lo[i] = (r0[i] + r1[i]) * kInvSqrt2;
          hi[i] = (r0[i] - r1[i]) * kInvSqrt2 * detail_sign;
        }
      }
    }
    // along D: slabs of (H,W) in b, paired over d; scatter into band outputs
    int64_t slab = e.h * e.w;
    for (int64_t id = 0; id < d2; ++id) {
      const real_t* s0 = b.data() + (2 * id) * slab;
      const real_t* s1 = s0 + slab;
      for (int64_t ih2 = 0; ih2 < 2; ++ih2) {
        for (int64_t iw2 = 0; iw2 < 2; ++iw2) {
          for (int64_t ih = 0; ih < h2; ++ih) {
            const real_t* p0 = s0 + (ih2 * h2 + ih) * e.w + iw2 * w2;
            const real_t* p1 = s1 + (ih2 * h2 + ih) * e.w + iw2 * w2;
            int lo_band = static_cast<int>((ih2 << 1) | iw2);
            int hi_band = lo_band | 4;
            real_t* plo =
                out[lo_band] + bt * bvol + (id * h2 + ih) * w2;
            real_t* phi =
                out[hi_band] + bt * bvol + (id * h2 + ih) * w2;
            for (int64_t i = 0; i < w2; ++i) {
              plo[i] = (p0[i] + p1[i]) * kInvSqrt2;
              phi[i] = (p0[i] - p1[i]) * kInvSqrt2 * detail_sign;
            }
          }
        }
      }
    }
  }
}

// Exact inverse of dwt3_core with detail_sign = +1.
void idwt3_core(const Shape& src_shape, const real_t* in[8], real_t* dst) {
  DwtDims e = dwt_dims(src_shape);
  int64_t d2 = e.d / 2, h2 = e.h / 2, w2 = e.w / 2;
  int64_t vol = e.d * e.h * e.w, bvol = d2 * h2 * w2;
  std::vector<real_t> a(vol), b(vol);
  for (int64_t bt = 0; bt < e.batch; ++bt) {
    // un-D: rebuild (D, 2x2 HW quadrant layout) into b
    int64_t slab = e.h * e.w;
    for (int64_t id = 0; id < d2; ++id) {
      real_t* s0 = b.data() + (2 * id) * slab;
      real_t* s1 = s0 + slab;
      for (int64_t ih2 = 0; ih2 < 2; ++ih2) {
        for (int64_t iw2 = 0; iw2 < 2; ++iw2) {
          int lo_band = static_cast<int>((ih2 << 1) | iw2);
          int hi_band = lo_band | 4;
          for (int64_t ih = 0; ih < h2; ++ih) {
            const real_t* plo = in[lo_band] + bt * bvol + (id * h2 + ih) * w2;
            const real_t* phi = in[hi_band] + bt * bvol + (id * h2 + ih) * w2;
            real_t* p0 = s0 + (ih2 * h2 + ih) * e.w + iw2 * w2;
            real_t* p1 = s1 + (ih2 * h2 + ih) * e.w + iw2 * w2;
            for (int64_t i = 0; i < w2; ++i) {
              p0[i] = (plo[i] + phi[i]) * kInvSqrt2;
              p1[i] = (plo[i] - phi[i]) * kInvSqrt2;
            }
          }
        }
      }
    }
    // un-H
    for (int64_t id = 0; id < e.d; ++id) {
      for (int64_t ih = 0; ih < h2; ++ih) {
        const real_t* lo = b.data() + (id * e.h + ih) * e.w;
        const real_t* hi = b.data() + (id * e.h + h2 + ih) * e.w;
        real_t* r0 = a.data() + (id * e.h + 2 * ih) * e.w;
        real_t* r1 = r0 + e.w;
        for (int64_t i = 0; i < e.w; ++i) {
          r0[i] = (lo[i] + hi[i]) * kInvSqrt2;
          r1[i] = (lo[i] - hi[i]) * kInvSqrt2;
        }
      }
    }
    // un-W
    real_t* x = dst + bt * vol;
    for (int64_t dh = 0; dh < e.d * e.h; ++dh) {
      const real_t* lo = a.data() + dh * e.w;
      const real_t* hi = lo + w2;
      real_t* row = x + dh * e.w;
      for (int64_t i = 0; i < w2; ++i) {
        row[2 * i] = (lo[i] + hi[i]) * kInvSqrt2;
        row[2 * i + 1] = (lo[i] - hi[i]) * kInvSqrt2;
      }
    }
  }
}

Shape band_shape(const Shape& s) {
  Shape bs = s;
  size_t n = bs.size();
  bs[n - 1] /= 2;
  bs[n - 2] /= 2;
  bs[n - 3] /= 2;
  return bs;
}

}  // namespace

void set_haar_detail_sign_flipped(bool flipped) {
  g_detail_sign_flipped = flipped;
}

SubbandSet dwt3_haar(const Tensor& x) {
  SubbandSet out;
  out.source_shape = x.shape();
  Shape bs = band_shape(x.shape());
  real_t* ptrs[8];
  for (int i = 0; i < 8; ++i) {
    out.bands[i] = Tensor(bs);
    ptrs[i] = out.bands[i].data();
  }
  real_t sign = g_detail_sign_flipped ? real_t(-1) : real_t(1);
  dwt3_core(x.shape(), x.data(), ptrs, sign);
  if (grad_active({x})) {
    TapeNode node;
    node.name = "dwt3_haar";
    node.inputs = {x.impl};
    for (int i = 0; i < 8; ++i) {
      out.bands[i].impl->needs_grad = true;
      out.bands[i].impl->tape = Tape::current();
      node.outputs.push_back(out.bands[i].impl);
    }
    auto xi = x.impl;
    auto outs = node.outputs;
    Shape src_shape = x.shape();
    node.backward = [xi, outs, src_shape, bs] {
      bool any = false;
      for (const auto& o : outs) any = any || holds_grad(o);
      if (!any || !xi->needs_grad) return;
      std::vector<real_t> zeros;
      const real_t* gptrs[8];
      for (int i = 0; i < 8; ++i) {
        if (holds_grad(outs[i])) {
          gptrs[i] = outs[i]->grad.data();
        } else {
          if (zeros.empty()) zeros.assign(numel(bs), 0);
          gptrs[i] = zeros.data();
        }
      }
      // orthonormal analysis: adjoint equals the synthesis transform
      std::vector<real_t> gx(xi->data.size());
      idwt3_core(src_shape, gptrs, gx.data());
      kernels::ops().axpy(ensure_grad(xi).data(), 1, gx.data(), gx.size());
    };
    record_node_raw(std::move(node));
  }
  return out;
}

Tensor idwt3_haar(const SubbandSet& s) {
  FEF_CHECK(!s.source_shape.empty(), "idwt3: missing source shape");
  Shape bs = band_shape(s.source_shape);
  const real_t* ptrs[8];
  for (int i = 0; i < 8; ++i) {
    FEF_CHECK(s.bands[i].defined() && s.bands[i].shape() == bs,
              "idwt3: band ", kSubbandNames[i], " has shape ",
              shape_str(s.bands[i].shape()), ", want ", shape_str(bs));
    ptrs[i] = s.bands[i].data();
  }
  Tensor out(s.source_shape);
  idwt3_core(s.source_shape, ptrs, out.data());
  bool any_grad = false;
  for (int i = 0; i < 8; ++i) any_grad = any_grad || s.bands[i].needs_grad();
  if (Tape::current() && any_grad) {
    TapeNode node;
    node.name = "idwt3_haar";
    for (int i = 0; i < 8; ++i) node.inputs.push_back(s.bands[i].impl);
    out.impl->needs_grad = true;
    out.impl->tape = Tape::current();
    node.outputs = {out.impl};
    auto ins = node.inputs;
    auto oi = out.impl;
    Shape src_shape = s.source_shape;
    node.backward = [ins, oi, src_shape] {
      if (!holds_grad(oi)) return;
      Shape bs2 = band_shape(src_shape);
      int64_t bn = numel(bs2);
      std::vector<std::vector<real_t>> gb(8, std::vector<real_t>(bn));
      real_t* ptrs2[8];
      for (int i = 0; i < 8; ++i) ptrs2[i] = gb[i].data();
      // adjoint of synthesis is analysis
      dwt3_core(src_shape, oi->grad.data(), ptrs2, real_t(1));
      for (int i = 0; i < 8; ++i)
        if (ins[i]->needs_grad)
          kernels::ops().axpy(ensure_grad(ins[i]).data(), 1, gb[i].data(), bn);
    };
    record_node_raw(std::move(node));
  }
  return out;
}

}  // namespace fef
