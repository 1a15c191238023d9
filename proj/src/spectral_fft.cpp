#include <cmath>
#include <map>
#include <memory>
#include <mutex>

#include "fef/kernels.hpp"
#include "fef/spectral.hpp"
#include "fef/threading.hpp"

namespace fef {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Plan {
  int64_t n = 1;
  std::vector<int> radices;  // factors of n, applied outermost first
  // e^(-2πi t/n) and e^(+2πi t/n), t in [0,n)
  std::vector<double> fwd_re, fwd_im, inv_re, inv_im;
};

bool factorize(int64_t n, std::vector<int>& out) {
  for (int r : {2, 3, 5}) {
    while (n % r == 0) {
      out.push_back(r);
      n /= r;
    }
  }
  return n == 1;
}

std::shared_ptr<const Plan> get_plan(int64_t n) {
  static std::mutex mu;
  static std::map<int64_t, std::shared_ptr<const Plan>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;

  auto plan = std::make_shared<Plan>();
  plan->n = n;
  FEF_CHECK(factorize(n, plan->radices),
            "unsupported FFT extent ", n, " (factors must be 2, 3, 5)");
  plan->fwd_re.resize(n);
  plan->fwd_im.resize(n);
  plan->inv_re.resize(n);
  plan->inv_im.resize(n);
  for (int64_t t = 0; t < n; ++t) {
    double a = 2.0 * kPi * static_cast<double>(t) / static_cast<double>(n);
    plan->fwd_re[t] = std::cos(a);
    plan->fwd_im[t] = -std::sin(a);
    plan->inv_re[t] = std::cos(a);
    plan->inv_im[t] = std::sin(a);
  }
  cache.emplace(n, plan);
  return plan;
}

// Recursive decimation-in-time over the radix list. Reads a strided line
// from (in_re, in_im), writes the contiguous spectrum of length `len` to
// (out_re, out_im). Twiddles index into the top-level table via n/len.
void fft_rec(const Plan& plan, const double* tw_re, const double* tw_im,
             size_t level, int64_t len, int64_t in_stride, const real_t* in_re,
             const real_t* in_im, double* out_re, double* out_im) {
  if (len == 1) {
    out_re[0] = static_cast<double>(in_re[0]);
    out_im[0] = in_im ? static_cast<double>(in_im[0]) : 0.0;
    return;
  }
  int r = plan.radices[level];
  int64_t m = len / r;
  for (int j = 0; j < r; ++j)
    fft_rec(plan, tw_re, tw_im, level + 1, m, in_stride * r,
            in_re + j * in_stride, in_im ? in_im + j * in_stride : nullptr,
            out_re + j * m, out_im + j * m);

  int64_t scale = plan.n / len;
  double zr[5], zi[5], xr[5], xi[5];
  for (int64_t q = 0; q < m; ++q) {
    for (int j = 0; j < r; ++j) {
      double yr = out_re[j * m + q], yi = out_im[j * m + q];
      int64_t t = ((j * q) % len) * scale;
      double wr = tw_re[t], wi = tw_im[t];
      zr[j] = yr * wr - yi * wi;
      zi[j] = yr * wi + yi * wr;
    }
    for (int s = 0; s < r; ++s) {
      double ar = zr[0], ai = zi[0];
      for (int j = 1; j < r; ++j) {
        int64_t t = ((static_cast<int64_t>(j) * s * m) % len) * scale;
        double wr = tw_re[t], wi = tw_im[t];
        ar += zr[j] * wr - zi[j] * wi;
        ai += zr[j] * wi + zi[j] * wr;
      }
      xr[s] = ar;
      xi[s] = ai;
    }
    for (int s = 0; s < r; ++s) {
      out_re[q + s * m] = xr[s];
      out_im[q + s * m] = xi[s];
    }
  }
}

struct Extents3 {
  int64_t batch, d, h, w;
};

Extents3 split_extents(const Shape& s) {
  FEF_CHECK(s.size() >= 3, "FFT input must have at least 3 axes, got ",
            shape_str(s));
  Extents3 e;
  e.w = s[s.size() - 1];
  e.h = s[s.size() - 2];
  e.d = s[s.size() - 3];
  e.batch = 1;
  for (size_t i = 0; i + 3 < s.size(); ++i) e.batch *= s[i];
  return e;
}

// In-place 1D pass over one axis of a packed complex volume.
void axis_pass(const Plan& plan, bool forward, real_t* re, real_t* im,
               int64_t n_lines, int64_t line_len, int64_t stride,
               int64_t line_block,  // flat offset step between line groups
               int64_t group_size)  // lines per group laid out contiguously
{
  const double* tw_re = forward ? plan.fwd_re.data() : plan.inv_re.data();
  const double* tw_im = forward ? plan.fwd_im.data() : plan.inv_im.data();
  parallel_for_blocked(n_lines, [&](int64_t lb, int64_t le) {
    std::vector<double> sr(line_len), si(line_len);
    for (int64_t l = lb; l < le; ++l) {
      int64_t base = (l / group_size) * line_block + (l % group_size);
      fft_rec(plan, tw_re, tw_im, 0, line_len, stride, re + base, im + base,
              sr.data(), si.data());
      for (int64_t t = 0; t < line_len; ++t) {
        re[base + t * stride] = static_cast<real_t>(sr[t]);
        im[base + t * stride] = static_cast<real_t>(si[t]);
      }
    }
  });
}

// Full 3D pass on split planes (in place).
void fft3_core(const Shape& shape, real_t* re, real_t* im, bool forward) {
  Extents3 e = split_extents(shape);
  auto pd = get_plan(e.d), ph = get_plan(e.h), pw = get_plan(e.w);
  int64_t vol = e.d * e.h * e.w;
  for (int64_t b = 0; b < e.batch; ++b) {
    real_t* bre = re + b * vol;
    real_t* bim = im + b * vol;
    // along W: lines indexed by (d,h), contiguous
    axis_pass(*pw, forward, bre, bim, e.d * e.h, e.w, 1, e.w, 1);
    // along H: stride W; groups of W lines per d-slab
    axis_pass(*ph, forward, bre, bim, e.d * e.w, e.h, e.w, e.h * e.w, e.w);
    // along D: stride H*W; one group of H*W lines
    axis_pass(*pd, forward, bre, bim, e.h * e.w, e.d, e.h * e.w, 0, e.h * e.w);
  }
}

}  // namespace

bool fft_extent_supported(int64_t n) {
  std::vector<int> f;
  return n >= 1 && factorize(n, f);
}

ComplexTensor fft3(const Tensor& x) {
  Extents3 e = split_extents(x.shape());
  (void)e;
  Tensor re(x.shape(), x.vec());
  Tensor im(x.shape());
  fft3_core(x.shape(), re.data(), im.data(), /*forward=*/true);
  if (grad_active({x})) {
    record_node("fft3", {x}, {re, im},
                [xi = x.impl, ri = re.impl, ii = im.impl] {
                  if (!holds_grad(ri) && !holds_grad(ii)) return;
                  if (!xi->needs_grad) return;
                  std::vector<real_t> gre = holds_grad(ri)
                                                ? ri->grad
                                                : std::vector<real_t>(
                                                      ri->data.size(), 0);
                  std::vector<real_t> gim = holds_grad(ii)
                                                ? ii->grad
                                                : std::vector<real_t>(
                                                      ii->data.size(), 0);
                  // unnormalized inverse of the upstream complex gradient;
                  // its real plane is d(loss)/dx
                  fft3_core(xi->shape, gre.data(), gim.data(),
                            /*forward=*/false);
                  kernels::ops().axpy(ensure_grad(xi).data(), 1, gre.data(),
                                      gre.size());
                });
  }
  return ComplexTensor{re, im};
}

Tensor ifft3_real(const ComplexTensor& s, double* max_imag_abs,
                  double* rel_imag, double rel_tol) {
  FEF_CHECK(s.re.shape() == s.im.shape(),
            "ifft3: re/im plane shapes differ");
  Extents3 e = split_extents(s.re.shape());
  real_t inv_n = real_t(1) / static_cast<real_t>(e.d * e.h * e.w);
  std::vector<real_t> wre = s.re.vec(), wim = s.im.vec();
  fft3_core(s.re.shape(), wre.data(), wim.data(), /*forward=*/false);
  double max_im = 0.0, max_re = 0.0;
  Tensor out(s.re.shape());
  for (size_t i = 0; i < wre.size(); ++i) {
    real_t v = wre[i] * inv_n;
    out.data()[i] = v;
    double iv = std::fabs(static_cast<double>(wim[i] * inv_n));
    if (iv > max_im) max_im = iv;
    double rv = std::fabs(static_cast<double>(v));
    if (rv > max_re) max_re = rv;
  }
  double rel = max_im / std::max(max_re, 1e-300);
  if (max_imag_abs) *max_imag_abs = max_im;
  if (rel_imag) *rel_imag = rel;
  FEF_CHECK(rel <= rel_tol, "ifft3: imaginary residue ", rel,
            " above caller tolerance ", rel_tol);
  if (grad_active({s.re, s.im})) {
    record_node("ifft3_real", {s.re, s.im}, {out},
                [ri = s.re.impl, ii = s.im.impl, oi = out.impl, inv_n] {
                  if (!holds_grad(oi)) return;
                  std::vector<real_t> gre = oi->grad;
                  std::vector<real_t> gim(gre.size(), 0);
                  // d/dS = (1/N) · forward transform of the output gradient
                  fft3_core(oi->shape, gre.data(), gim.data(),
                            /*forward=*/true);
                  if (ri->needs_grad) {
                    auto& g = ensure_grad(ri);
                    kernels::ops().axpy(g.data(), inv_n, gre.data(),
                                        gre.size());
                  }
                  if (ii->needs_grad) {
                    auto& g = ensure_grad(ii);
                    kernels::ops().axpy(g.data(), inv_n, gim.data(),
                                        gim.size());
                  }
                });
  }
  return out;
}

ComplexTensor ifft3_full(const ComplexTensor& s) {
  Extents3 e = split_extents(s.re.shape());
  real_t inv_n = real_t(1) / static_cast<real_t>(e.d * e.h * e.w);
  Tensor re(s.re.shape(), s.re.vec());
  Tensor im(s.im.shape(), s.im.vec());
  fft3_core(s.re.shape(), re.data(), im.data(), /*forward=*/false);
  for (int64_t i = 0; i < re.numel(); ++i) {
    re.data()[i] *= inv_n;
    im.data()[i] *= inv_n;
  }
  return ComplexTensor{re, im};
}

ComplexTensor complex_mul(const ComplexTensor& a, const ComplexTensor& b) {
  FEF_CHECK(a.re.shape() == b.re.shape(),
            "complex_mul: shape mismatch ", shape_str(a.re.shape()), " vs ",
            shape_str(b.re.shape()));
  int64_t n = a.re.numel();
  Tensor cre(a.re.shape()), cim(a.re.shape());
  kernels::ops().cmul(cre.data(), cim.data(), a.re.data(), a.im.data(),
                      b.re.data(), b.im.data(), n);
  if (grad_active({a.re, a.im, b.re, b.im})) {
    record_node(
        "complex_mul", {a.re, a.im, b.re, b.im}, {cre, cim},
        [ar = a.re.impl, ai = a.im.impl, br = b.re.impl, bi = b.im.impl,
         cr = cre.impl, ci = cim.impl, n] {
          if (!holds_grad(cr) && !holds_grad(ci)) return;
          std::vector<real_t> zero;
          const real_t* gr = holds_grad(cr) ? cr->grad.data() : nullptr;
          const real_t* gi = holds_grad(ci) ? ci->grad.data() : nullptr;
          if (!gr || !gi) {
            zero.assign(n, 0);
            if (!gr) gr = zero.data();
            if (!gi) gi = zero.data();
          }
          auto& K = kernels::ops();
          if (ar->needs_grad) {
            auto& g = ensure_grad(ar);
            K.addmul(g.data(), gr, br->data.data(), n);
            K.addmul(g.data(), gi, bi->data.data(), n);
          }
          if (ai->needs_grad) {
            auto& g = ensure_grad(ai);
            for (int64_t i = 0; i < n; ++i)
              g[i] += gi[i] * br->data[i] - gr[i] * bi->data[i];
          }
          if (br->needs_grad) {
            auto& g = ensure_grad(br);
            K.addmul(g.data(), gr, ar->data.data(), n);
            K.addmul(g.data(), gi, ai->data.data(), n);
          }
          if (bi->needs_grad) {
            auto& g = ensure_grad(bi);
            for (int64_t i = 0; i < n; ++i)
              g[i] += gi[i] * ar->data[i] - gr[i] * ai->data[i];
          }
        });
  }
  return ComplexTensor{cre, cim};
}

Tensor complex_abs(const ComplexTensor& a) {
  int64_t n = a.re.numel();
  Tensor out(a.re.shape());
  for (int64_t i = 0; i < n; ++i)
    out.data()[i] = std::sqrt(a.re.data()[i] * a.re.data()[i] +
                              a.im.data()[i] * a.im.data()[i]);
  if (grad_active({a.re, a.im})) {
    record_node("complex_abs", {a.re, a.im}, {out},
                [ar = a.re.impl, ai = a.im.impl, oi = out.impl, n] {
                  if (!holds_grad(oi)) return;
                  const auto& g = oi->grad;
                  const auto& m = oi->data;
                  if (ar->needs_grad) {
                    auto& ga = ensure_grad(ar);
                    for (int64_t i = 0; i < n; ++i)
                      if (m[i] != real_t(0)) ga[i] += g[i] * ar->data[i] / m[i];
                  }
                  if (ai->needs_grad) {
                    auto& ga = ensure_grad(ai);
                    for (int64_t i = 0; i < n; ++i)
                      if (m[i] != real_t(0)) ga[i] += g[i] * ai->data[i] / m[i];
                  }
                });
  }
  return out;
}

}  // namespace fef
