#include "fef/kernels.hpp"
#include "fef/nn_ops.hpp"
#include "fef/threading.hpp"

namespace fef {

void ConvSpec::validate() const {
  FEF_CHECK(in_channels > 0 && out_channels > 0 && kernel > 0 && stride > 0,
            "conv spec: non-positive field");
  FEF_CHECK(groups > 0 && in_channels % groups == 0 &&
                out_channels % groups == 0,
            "conv spec: channels (", in_channels, ",", out_channels,
            ") not divisible by groups ", groups);
  FEF_CHECK(padding >= 0, "conv spec: negative padding");
  FEF_CHECK(!transposed || (output_padding >= 0 && output_padding < stride),
            "conv spec: output_padding must be in [0, stride)");
}

Shape ConvSpec::weight_shape() const {
  if (transposed)
    return {in_channels, out_channels / groups, kernel, kernel, kernel};
  return {out_channels, in_channels / groups, kernel, kernel, kernel};
}

int64_t ConvSpec::out_extent(int64_t in) const {
  if (transposed) return (in - 1) * stride - 2 * padding + kernel + output_padding;
  return (in + 2 * padding - kernel) / stride + 1;
}

namespace {

const kernels::Ops& K() { return kernels::ops(); }

struct ConvDims {
  int64_t B, Cin, D, H, W;
  int64_t Cout, Do, Ho, Wo;
  int64_t k, s, p;
  int64_t groups, cin_g, cout_g;
};

ConvDims conv_dims(const Shape& xs, const ConvSpec& spec) {
  FEF_CHECK(xs.size() == 5, "conv3d: want rank-5 input, got ", shape_str(xs));
  FEF_CHECK(xs[1] == spec.in_channels, "conv3d: input has ", xs[1],
            " channels, spec wants ", spec.in_channels);
  ConvDims d;
  d.B = xs[0];
  d.Cin = xs[1];
  d.D = xs[2];
  d.H = xs[3];
  d.W = xs[4];
  d.Cout = spec.out_channels;
  d.Do = spec.out_extent(d.D);
  d.Ho = spec.out_extent(d.H);
  d.Wo = spec.out_extent(d.W);
  FEF_CHECK(d.Do > 0 && d.Ho > 0 && d.Wo > 0,
            "conv3d: non-positive output extents");
  d.k = spec.kernel;
  d.s = spec.stride;
  d.p = spec.padding;
  d.groups = spec.groups;
  d.cin_g = d.Cin / d.groups;
  d.cout_g = d.Cout / d.groups;
  return d;
}

// ---- forward conv: one (b, co) output slice -------------------------------

void conv_fwd_slice(const ConvDims& d, const real_t* x, const real_t* w,
                    real_t bias, real_t* out, int64_t b, int64_t co) {
  int64_t ovol = d.Do * d.Ho * d.Wo;
  real_t* o = out + (b * d.Cout + co) * ovol;
  for (int64_t i = 0; i < ovol; ++i) o[i] = bias;
  int64_t gi = co / d.cout_g;
  int64_t k3 = d.k * d.k * d.k;
  for (int64_t cl = 0; cl < d.cin_g; ++cl) {
    int64_t ci = gi * d.cin_g + cl;
    const real_t* xs = x + (b * d.Cin + ci) * d.D * d.H * d.W;
    const real_t* ws = w + (co * d.cin_g + cl) * k3;
    for (int64_t kd = 0; kd < d.k; ++kd)
      for (int64_t kh = 0; kh < d.k; ++kh)
        for (int64_t kw = 0; kw < d.k; ++kw) {
          real_t wv = ws[(kd * d.k + kh) * d.k + kw];
          if (wv == real_t(0)) continue;
          if (d.s == 1) {
            int64_t od_lo = std::max<int64_t>(0, d.p - kd);
            int64_t od_hi = std::min(d.Do, d.D - kd + d.p);
            int64_t oh_lo = std::max<int64_t>(0, d.p - kh);
            int64_t oh_hi = std::min(d.Ho, d.H - kh + d.p);
            int64_t ow_lo = std::max<int64_t>(0, d.p - kw);
            int64_t ow_hi = std::min(d.Wo, d.W - kw + d.p);
            for (int64_t od = od_lo; od < od_hi; ++od) {
              int64_t id = od + kd - d.p;
              for (int64_t oh = oh_lo; oh < oh_hi; ++oh) {
                int64_t ih = oh + kh - d.p;
                real_t* orow = o + (od * d.Ho + oh) * d.Wo + ow_lo;
                const real_t* xrow =
                    xs + (id * d.H + ih) * d.W + ow_lo + kw - d.p;
                K().axpy(orow, wv, xrow, ow_hi - ow_lo);
              }
            }
          } else {
            for (int64_t od = 0; od < d.Do; ++od) {
              int64_t id = od * d.s + kd - d.p;
              if (id < 0 || id >= d.D) continue;
              for (int64_t oh = 0; oh < d.Ho; ++oh) {
                int64_t ih = oh * d.s + kh - d.p;
                if (ih < 0 || ih >= d.H) continue;
                real_t* orow = o + (od * d.Ho + oh) * d.Wo;
                const real_t* xrow = xs + (id * d.H + ih) * d.W;
                for (int64_t ow = 0; ow < d.Wo; ++ow) {
                  int64_t iw = ow * d.s + kw - d.p;
                  if (iw < 0 || iw >= d.W) continue;
                  orow[ow] += wv * xrow[iw];
                }
              }
            }
          }
        }
  }
}

// ---- transposed conv: one (b, co) output slice ----------------------------

void convT_fwd_slice(const ConvDims& d, const real_t* x, const real_t* w,
                     real_t bias, real_t* out, int64_t b, int64_t co) {
  int64_t ovol = d.Do * d.Ho * d.Wo;
  real_t* o = out + (b * d.Cout + co) * ovol;
  for (int64_t i = 0; i < ovol; ++i) o[i] = bias;
  int64_t gi = co / d.cout_g;
  int64_t col = co % d.cout_g;
  int64_t k3 = d.k * d.k * d.k;
  for (int64_t cl = 0; cl < d.cin_g; ++cl) {
    int64_t ci = gi * d.cin_g + cl;
    const real_t* xs = x + (b * d.Cin + ci) * d.D * d.H * d.W;
    const real_t* ws = w + (ci * d.cout_g + col) * k3;
    for (int64_t id = 0; id < d.D; ++id)
      for (int64_t ih = 0; ih < d.H; ++ih) {
        const real_t* xrow = xs + (id * d.H + ih) * d.W;
        for (int64_t iw = 0; iw < d.W; ++iw) {
          real_t xv = xrow[iw];
          if (xv == real_t(0)) continue;
          for (int64_t kd = 0; kd < d.k; ++kd) {
            int64_t od = id * d.s - d.p + kd;
            if (od < 0 || od >= d.Do) continue;
            for (int64_t kh = 0; kh < d.k; ++kh) {
              int64_t oh = ih * d.s - d.p + kh;
              if (oh < 0 || oh >= d.Ho) continue;
              real_t* orow = o + (od * d.Ho + oh) * d.Wo;
              const real_t* wrow = ws + (kd * d.k + kh) * d.k;
              for (int64_t kw = 0; kw < d.k; ++kw) {
                int64_t ow = iw * d.s - d.p + kw;
                if (ow < 0 || ow >= d.Wo) continue;
                orow[ow] += xv * wrow[kw];
              }
            }
          }
        }
      }
  }
}

// ---- backward pieces (serial over batch; shapes here are small) -----------

void conv_backward(const ConvDims& d, bool transposed, const real_t* x,
                   const real_t* w, const real_t* g, real_t* gx, real_t* gw,
                   real_t* gb) {
  int64_t k3 = d.k * d.k * d.k;
  int64_t ovol = d.Do * d.Ho * d.Wo;
  int64_t ivol = d.D * d.H * d.W;
  for (int64_t b = 0; b < d.B; ++b)
    for (int64_t co = 0; co < d.Cout; ++co) {
      const real_t* gs = g + (b * d.Cout + co) * ovol;
      if (gb) gb[co] += K().sum(gs, ovol);
      int64_t gi = co / d.cout_g;
      int64_t col = co % d.cout_g;
      for (int64_t cl = 0; cl < d.cin_g; ++cl) {
        int64_t ci = gi * d.cin_g + cl;
        const real_t* xs = x + (b * d.Cin + ci) * ivol;
        real_t* gxs = gx ? gx + (b * d.Cin + ci) * ivol : nullptr;
        int64_t widx = transposed ? (ci * d.cout_g + col) * k3
                                  : (co * d.cin_g + cl) * k3;
        const real_t* ws = w + widx;
        real_t* gws = gw ? gw + widx : nullptr;
        for (int64_t od = 0; od < d.Do; ++od)
          for (int64_t oh = 0; oh < d.Ho; ++oh)
            for (int64_t ow = 0; ow < d.Wo; ++ow) {
              real_t gv = gs[(od * d.Ho + oh) * d.Wo + ow];
              if (gv == real_t(0)) continue;
              for (int64_t kd = 0; kd < d.k; ++kd)
                for (int64_t kh = 0; kh < d.k; ++kh)
                  for (int64_t kw = 0; kw < d.k; ++kw) {
                    int64_t id, ih, iw;
                    if (!transposed) {
                      id = od * d.s + kd - d.p;
                      ih = oh * d.s + kh - d.p;
                      iw = ow * d.s + kw - d.p;
                    } else {
                      // output index = input*s - p + k ⇒ invert
                      id = od + d.p - kd;
                      ih = oh + d.p - kh;
                      iw = ow + d.p - kw;
                      if (id % d.s || ih % d.s || iw % d.s) continue;
                      id /= d.s;
                      ih /= d.s;
                      iw /= d.s;
                    }
                    if (id < 0 || id >= d.D || ih < 0 || ih >= d.H || iw < 0 ||
                        iw >= d.W)
                      continue;
                    int64_t xoff = (id * d.H + ih) * d.W + iw;
                    int64_t koff = (kd * d.k + kh) * d.k + kw;
                    if (gxs) gxs[xoff] += gv * ws[koff];
                    if (gws) gws[koff] += gv * xs[xoff];
                  }
            }
      }
    }
}

}  // namespace

Tensor conv3d(const Tensor& x, const ConvSpec& spec, const Tensor& weights,
              const Tensor& bias) {
  spec.validate();
  ConvDims d = conv_dims(x.shape(), spec);
  FEF_CHECK(weights.shape() == spec.weight_shape(),
            "conv3d: weight shape ", shape_str(weights.shape()), ", want ",
            shape_str(spec.weight_shape()));
  FEF_CHECK(bias.shape() == Shape{d.Cout}, "conv3d: bias shape ",
            shape_str(bias.shape()), ", want (", d.Cout, ")");

  Tensor out(Shape{d.B, d.Cout, d.Do, d.Ho, d.Wo});
  const real_t* xp = x.data();
  const real_t* wp = weights.data();
  const real_t* bp = bias.data();
  real_t* op = out.data();
  bool transposed = spec.transposed;
  parallel_for(d.B * d.Cout, [&](int64_t i) {
    int64_t b = i / d.Cout, co = i % d.Cout;
    if (transposed)
      convT_fwd_slice(d, xp, wp, bp[co], op, b, co);
    else
      conv_fwd_slice(d, xp, wp, bp[co], op, b, co);
  });

  if (grad_active({x, weights, bias})) {
    record_node("conv3d", {x, weights, bias}, {out},
                [xi = x.impl, wi = weights.impl, bi = bias.impl,
                 oi = out.impl, d, transposed] {
                  if (!holds_grad(oi)) return;
                  real_t* gx =
                      xi->needs_grad ? ensure_grad(xi).data() : nullptr;
                  real_t* gw =
                      wi->needs_grad ? ensure_grad(wi).data() : nullptr;
                  real_t* gb =
                      bi->needs_grad ? ensure_grad(bi).data() : nullptr;
                  conv_backward(d, transposed, xi->data.data(),
                                wi->data.data(), oi->grad.data(), gx, gw, gb);
                });
  }
  return out;
}

Tensor dynamic_depthwise_conv3d(const Tensor& x, const Tensor& kernels) {
  FEF_CHECK(x.rank() == 5, "dynamic conv: want (B,C,D,H,W) input");
  FEF_CHECK(kernels.rank() == 5 && kernels.dim(0) == x.dim(0) &&
                kernels.dim(1) == x.dim(1) &&
                kernels.dim(2) == kernels.dim(3) &&
                kernels.dim(3) == kernels.dim(4),
            "dynamic conv: want kernels (B,C,k,k,k), got ",
            shape_str(kernels.shape()));
  int64_t B = x.dim(0), C = x.dim(1), D = x.dim(2), H = x.dim(3),
          W = x.dim(4);
  int64_t k = kernels.dim(2);
  FEF_CHECK(k % 2 == 1, "dynamic conv: kernel extent must be odd");
  int64_t p = k / 2;
  int64_t vol = D * H * W, k3 = k * k * k;
  Tensor out(x.shape());

  auto run_slice = [&, B, C](const real_t* xp, const real_t* kp, real_t* op,
                             int64_t bc) {
    const real_t* xs = xp + bc * vol;
    const real_t* ks = kp + bc * k3;
    real_t* o = op + bc * vol;
    std::fill(o, o + vol, real_t(0));
    for (int64_t kd = 0; kd < k; ++kd)
      for (int64_t kh = 0; kh < k; ++kh)
        for (int64_t kw = 0; kw < k; ++kw) {
          real_t wv = ks[(kd * k + kh) * k + kw];
          int64_t od_lo = std::max<int64_t>(0, p - kd);
          int64_t od_hi = std::min(D, D - kd + p);
          int64_t oh_lo = std::max<int64_t>(0, p - kh);
          int64_t oh_hi = std::min(H, H - kh + p);
          int64_t ow_lo = std::max<int64_t>(0, p - kw);
          int64_t ow_hi = std::min(W, W - kw + p);
          for (int64_t od = od_lo; od < od_hi; ++od)
            for (int64_t oh = oh_lo; oh < oh_hi; ++oh) {
              real_t* orow = o + (od * H + oh) * W + ow_lo;
              const real_t* xrow =
                  xs + ((od + kd - p) * H + (oh + kh - p)) * W + ow_lo + kw - p;
              K().axpy(orow, wv, xrow, ow_hi - ow_lo);
            }
        }
  };
  parallel_for(B * C, [&](int64_t bc) {
    run_slice(x.data(), kernels.data(), out.data(), bc);
  });

  if (grad_active({x, kernels})) {
    record_node(
        "dynamic_depthwise_conv3d", {x, kernels}, {out},
        [xi = x.impl, ki = kernels.impl, oi = out.impl, B, C, D, H, W, k, p,
         vol, k3] {
          if (!holds_grad(oi)) return;
          real_t* gx = xi->needs_grad ? ensure_grad(xi).data() : nullptr;
          real_t* gk = ki->needs_grad ? ensure_grad(ki).data() : nullptr;
          for (int64_t bc = 0; bc < B * C; ++bc) {
            const real_t* gs = oi->grad.data() + bc * vol;
            const real_t* xs = xi->data.data() + bc * vol;
            const real_t* ks = ki->data.data() + bc * k3;
            for (int64_t od = 0; od < D; ++od)
              for (int64_t oh = 0; oh < H; ++oh)
                for (int64_t ow = 0; ow < W; ++ow) {
                  real_t gv = gs[(od * H + oh) * W + ow];
                  if (gv == real_t(0)) continue;
                  for (int64_t kd = 0; kd < k; ++kd) {
                    int64_t id = od + kd - p;
                    if (id < 0 || id >= D) continue;
                    for (int64_t kh = 0; kh < k; ++kh) {
                      int64_t ih = oh + kh - p;
                      if (ih < 0 || ih >= H) continue;
                      for (int64_t kw = 0; kw < k; ++kw) {
                        int64_t iw = ow + kw - p;
                        if (iw < 0 || iw >= W) continue;
                        int64_t xoff = (id * H + ih) * W + iw;
                        int64_t koff = (kd * k + kh) * k + kw;
                        if (gx) gx[bc * vol + xoff] += gv * ks[koff];
                        if (gk) gk[bc * k3 + koff] += gv * xs[xoff];
                      }
                    }
                  }
                }
          }
        });
  }
  return out;
}

}  // namespace fef
