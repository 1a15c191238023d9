#include <cmath>

#include "fef/kernels.hpp"
#include "fef/nn_ops.hpp"
#include "fef/threading.hpp"

namespace fef {

namespace {
const kernels::Ops& K() { return kernels::ops(); }
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
}  // namespace

Tensor linear(const Tensor& x, const Tensor& W, const Tensor& b) {
  FEF_CHECK(x.rank() >= 1 && W.rank() == 2, "linear: bad ranks");
  int64_t cin = x.dim(x.rank() - 1);
  FEF_CHECK(W.dim(0) == cin, "linear: input trailing axis ", cin,
            " vs W rows ", W.dim(0));
  int64_t cout = W.dim(1);
  FEF_CHECK(b.shape() == Shape{cout}, "linear: bias shape mismatch");
  int64_t rows = x.numel() / cin;
  Shape out_shape = x.shape();
  out_shape.back() = cout;
  Tensor out(out_shape);
  const real_t* xp = x.data();
  const real_t* wp = W.data();
  const real_t* bp = b.data();
  real_t* op = out.data();
  parallel_for_blocked(rows, [&](int64_t r0, int64_t r1) {
    for (int64_t r = r0; r < r1; ++r) {
      real_t* orow = op + r * cout;
      std::copy(bp, bp + cout, orow);
      const real_t* xrow = xp + r * cin;
      for (int64_t ci = 0; ci < cin; ++ci)
        K().axpy(orow, xrow[ci], wp + ci * cout, cout);
    }
  });
  if (grad_active({x, W, b})) {
    record_node("linear", {x, W, b}, {out},
                [xi = x.impl, wi = W.impl, bi = b.impl, oi = out.impl, rows,
                 cin, cout] {
                  if (!holds_grad(oi)) return;
                  const real_t* g = oi->grad.data();
                  if (xi->needs_grad) {
                    auto& gx = ensure_grad(xi);
                    for (int64_t r = 0; r < rows; ++r)
                      for (int64_t ci = 0; ci < cin; ++ci)
                        gx[r * cin + ci] += K().dot(
                            g + r * cout, wi->data.data() + ci * cout, cout);
                  }
                  if (wi->needs_grad) {
                    auto& gw = ensure_grad(wi);
                    for (int64_t r = 0; r < rows; ++r) {
                      const real_t* xrow = xi->data.data() + r * cin;
                      for (int64_t ci = 0; ci < cin; ++ci)
                        K().axpy(gw.data() + ci * cout, xrow[ci], g + r * cout,
                                 cout);
                    }
                  }
                  if (bi->needs_grad) {
                    auto& gb = ensure_grad(bi);
                    for (int64_t r = 0; r < rows; ++r)
                      K().axpy(gb.data(), 1, g + r * cout, cout);
                  }
                });
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps) {
  int64_t c = x.dim(x.rank() - 1);
  FEF_CHECK(c >= 1, "layer_norm: empty channel axis");
  FEF_CHECK(gamma.shape() == Shape{c} && beta.shape() == Shape{c},
            "layer_norm: affine shape mismatch");
  int64_t rows = x.numel() / c;
  Tensor out(x.shape());
  std::vector<real_t> mean(rows), inv_std(rows);
  const real_t* xp = x.data();
  real_t* op = out.data();
  const real_t* gp = gamma.data();
  const real_t* bp = beta.data();
  for (int64_t r = 0; r < rows; ++r) {
    const real_t* row = xp + r * c;
    real_t mu = K().sum(row, c) / static_cast<real_t>(c);
    real_t var = 0;
    for (int64_t i = 0; i < c; ++i) var += (row[i] - mu) * (row[i] - mu);
    var /= static_cast<real_t>(c);
    real_t is = real_t(1) / std::sqrt(var + static_cast<real_t>(eps));
    mean[r] = mu;
    inv_std[r] = is;
    real_t* orow = op + r * c;
    for (int64_t i = 0; i < c; ++i)
      orow[i] = (row[i] - mu) * is * gp[i] + bp[i];
  }
  if (grad_active({x, gamma, beta})) {
    record_node(
        "layer_norm", {x, gamma, beta}, {out},
        [xi = x.impl, gi = gamma.impl, bi = beta.impl, oi = out.impl, rows, c,
         mean = std::move(mean), inv_std = std::move(inv_std)] {
          if (!holds_grad(oi)) return;
          const real_t* g = oi->grad.data();
          std::vector<real_t> xhat(c), dxhat(c);
          for (int64_t r = 0; r < rows; ++r) {
            const real_t* xr = xi->data.data() + r * c;
            const real_t* gr = g + r * c;
            for (int64_t i = 0; i < c; ++i)
              xhat[i] = (xr[i] - mean[r]) * inv_std[r];
            if (gi->needs_grad) {
              auto& gg = ensure_grad(gi);
              for (int64_t i = 0; i < c; ++i) gg[i] += gr[i] * xhat[i];
            }
            if (bi->needs_grad) {
              auto& gb = ensure_grad(bi);
              K().axpy(gb.data(), 1, gr, c);
            }
            if (xi->needs_grad) {
              auto& gx = ensure_grad(xi);
              real_t sum_d = 0, sum_dx = 0;
              for (int64_t i = 0; i < c; ++i) {
                dxhat[i] = gr[i] * gi->data[i];
                sum_d += dxhat[i];
                sum_dx += dxhat[i] * xhat[i];
              }
              real_t inv_c = real_t(1) / static_cast<real_t>(c);
              for (int64_t i = 0; i < c; ++i)
                gx[r * c + i] += inv_std[r] * (dxhat[i] - sum_d * inv_c -
                                               xhat[i] * sum_dx * inv_c);
            }
          }
        });
  }
  return out;
}

BatchNormState make_batch_norm(int64_t channels) {
  BatchNormState s;
  s.gamma = Tensor::full({channels}, 1);
  s.beta = Tensor({channels});
  s.running_mean = Tensor({channels});
  s.running_var = Tensor::full({channels}, 1);
  return s;
}

Tensor batch_norm(const Tensor& x, BatchNormState& state, bool training) {
  FEF_CHECK(x.rank() >= 2, "batch_norm: want (B,C,...)");
  int64_t B = x.dim(0), C = x.dim(1);
  FEF_CHECK(state.gamma.numel() == C, "batch_norm: channel mismatch");
  int64_t s = x.numel() / (B * C);
  int64_t m = B * s;
  Tensor out(x.shape());
  const real_t* xp = x.data();
  real_t* op = out.data();
  const real_t* gp = state.gamma.data();
  const real_t* bp = state.beta.data();

  auto row_off = [&](int64_t b, int64_t c) { return (b * C + c) * s; };

  if (!training) {
    FEF_CHECK(state.update_count > 0,
              "batch_norm: eval mode without populated running stats");
    std::vector<real_t> scale(C), shift(C);
    for (int64_t c = 0; c < C; ++c) {
      real_t is = real_t(1) / std::sqrt(state.running_var.data()[c] +
                                        static_cast<real_t>(state.eps));
      scale[c] = gp[c] * is;
      shift[c] = bp[c] - state.running_mean.data()[c] * scale[c];
    }
    for (int64_t b = 0; b < B; ++b)
      for (int64_t c = 0; c < C; ++c) {
        const real_t* xr = xp + row_off(b, c);
        real_t* orow = op + row_off(b, c);
        for (int64_t i = 0; i < s; ++i) orow[i] = xr[i] * scale[c] + shift[c];
      }
    if (grad_active({x, state.gamma, state.beta})) {
      record_node("batch_norm_eval", {x, state.gamma, state.beta}, {out},
                  [xi = x.impl, oi = out.impl, scale, B, C, s, row_off] {
                    if (!holds_grad(oi) || !xi->needs_grad) return;
                    auto& gx = ensure_grad(xi);
                    for (int64_t b = 0; b < B; ++b)
                      for (int64_t c = 0; c < C; ++c)
                        K().axpy(gx.data() + row_off(b, c), scale[c],
                                 oi->grad.data() + row_off(b, c), s);
                  });
    }
    return out;
  }

  FEF_CHECK(m >= 2, "batch_norm: training needs batch*spatial count >= 2");
  std::vector<real_t> mu(C), var(C), inv_std(C);
  for (int64_t c = 0; c < C; ++c) {
    real_t acc = 0;
    for (int64_t b = 0; b < B; ++b) acc += K().sum(xp + row_off(b, c), s);
    mu[c] = acc / static_cast<real_t>(m);
    real_t v = 0;
    for (int64_t b = 0; b < B; ++b) {
      const real_t* xr = xp + row_off(b, c);
      for (int64_t i = 0; i < s; ++i) v += (xr[i] - mu[c]) * (xr[i] - mu[c]);
    }
    var[c] = v / static_cast<real_t>(m);
    inv_std[c] = real_t(1) / std::sqrt(var[c] + static_cast<real_t>(state.eps));
    for (int64_t b = 0; b < B; ++b) {
      const real_t* xr = xp + row_off(b, c);
      real_t* orow = op + row_off(b, c);
      for (int64_t i = 0; i < s; ++i)
        orow[i] = (xr[i] - mu[c]) * inv_std[c] * gp[c] + bp[c];
    }
    real_t mom = static_cast<real_t>(state.momentum);
    state.running_mean.data()[c] =
        (1 - mom) * state.running_mean.data()[c] + mom * mu[c];
    state.running_var.data()[c] =
        (1 - mom) * state.running_var.data()[c] + mom * var[c];
  }
  state.update_count++;

  if (grad_active({x, state.gamma, state.beta})) {
    record_node(
        "batch_norm", {x, state.gamma, state.beta}, {out},
        [xi = x.impl, gi = state.gamma.impl, bi = state.beta.impl,
         oi = out.impl, mu = std::move(mu), inv_std = std::move(inv_std), B, C,
         s, m, row_off] {
          if (!holds_grad(oi)) return;
          const real_t* g = oi->grad.data();
          for (int64_t c = 0; c < C; ++c) {
            real_t sum_d = 0, sum_dx = 0;  // over (B, spatial)
            for (int64_t b = 0; b < B; ++b) {
              const real_t* gr = g + row_off(b, c);
              const real_t* xr = xi->data.data() + row_off(b, c);
              for (int64_t i = 0; i < s; ++i) {
                real_t xh = (xr[i] - mu[c]) * inv_std[c];
                sum_d += gr[i];
                sum_dx += gr[i] * xh;
              }
            }
            if (gi->needs_grad) ensure_grad(gi)[c] += sum_dx;
            if (bi->needs_grad) ensure_grad(bi)[c] += sum_d;
            if (xi->needs_grad) {
              auto& gx = ensure_grad(xi);
              real_t inv_m = real_t(1) / static_cast<real_t>(m);
              real_t gam = gi->data[c];
              for (int64_t b = 0; b < B; ++b) {
                const real_t* gr = g + row_off(b, c);
                const real_t* xr = xi->data.data() + row_off(b, c);
                real_t* gxr = gx.data() + row_off(b, c);
                for (int64_t i = 0; i < s; ++i) {
                  real_t xh = (xr[i] - mu[c]) * inv_std[c];
                  gxr[i] += gam * inv_std[c] *
                            (gr[i] - sum_d * inv_m - xh * sum_dx * inv_m);
                }
              }
            }
          }
        });
  }
  return out;
}

Tensor activation(Act kind, const Tensor& x) {
  int64_t n = x.numel();
  Tensor out(x.shape());
  const real_t* xp = x.data();
  real_t* op = out.data();
  switch (kind) {
    case Act::ReLU:
      for (int64_t i = 0; i < n; ++i) op[i] = xp[i] > 0 ? xp[i] : 0;
      break;
    case Act::ReLU6:
      for (int64_t i = 0; i < n; ++i)
        op[i] = xp[i] <= 0 ? real_t(0) : (xp[i] >= 6 ? real_t(6) : xp[i]);
      break;
    case Act::Sigmoid:
      for (int64_t i = 0; i < n; ++i)
        op[i] = real_t(1) / (real_t(1) + std::exp(-xp[i]));
      break;
    case Act::GELU:
      for (int64_t i = 0; i < n; ++i) {
        double v = static_cast<double>(xp[i]);
        op[i] = static_cast<real_t>(v * 0.5 * (1.0 + std::erf(v * kInvSqrt2)));
      }
      break;
  }
  if (grad_active({x})) {
    record_node("activation", {x}, {out},
                [xi = x.impl, oi = out.impl, kind, n] {
                  if (!holds_grad(oi) || !xi->needs_grad) return;
                  auto& gx = ensure_grad(xi);
                  const real_t* g = oi->grad.data();
                  const real_t* xv = xi->data.data();
                  const real_t* y = oi->data.data();
                  switch (kind) {
                    case Act::ReLU:
                      for (int64_t i = 0; i < n; ++i)
                        if (xv[i] > 0) gx[i] += g[i];
                      break;
                    case Act::ReLU6:
                      for (int64_t i = 0; i < n; ++i)
                        if (xv[i] > 0 && xv[i] < 6) gx[i] += g[i];
                      break;
                    case Act::Sigmoid:
                      for (int64_t i = 0; i < n; ++i)
                        gx[i] += g[i] * y[i] * (1 - y[i]);
                      break;
                    case Act::GELU:
                      for (int64_t i = 0; i < n; ++i) {
                        double v = static_cast<double>(xv[i]);
                        double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
                        double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
                        gx[i] += g[i] * static_cast<real_t>(cdf + v * pdf);
                      }
                      break;
                  }
                });
  }
  return out;
}

Tensor softmax_spatial(const Tensor& x) {
  FEF_CHECK(x.rank() >= 3, "softmax_spatial: want (B,C,spatial...)");
  int64_t bc = x.dim(0) * x.dim(1);
  int64_t s = x.numel() / bc;
  Tensor out(x.shape());
  const real_t* xp = x.data();
  real_t* op = out.data();
  parallel_for_blocked(bc, [&](int64_t r0, int64_t r1) {
    for (int64_t r = r0; r < r1; ++r) {
      const real_t* row = xp + r * s;
      real_t* orow = op + r * s;
      real_t mx = row[0];
      for (int64_t i = 1; i < s; ++i) mx = std::max(mx, row[i]);
      real_t z = 0;
      for (int64_t i = 0; i < s; ++i) {
        orow[i] = std::exp(row[i] - mx);
        z += orow[i];
      }
      real_t inv = real_t(1) / z;
      for (int64_t i = 0; i < s; ++i) orow[i] *= inv;
    }
  });
  if (grad_active({x})) {
    record_node("softmax_spatial", {x}, {out},
                [xi = x.impl, oi = out.impl, bc, s] {
                  if (!holds_grad(oi) || !xi->needs_grad) return;
                  auto& gx = ensure_grad(xi);
                  for (int64_t r = 0; r < bc; ++r) {
                    const real_t* y = oi->data.data() + r * s;
                    const real_t* g = oi->grad.data() + r * s;
                    real_t dot = K().dot(g, y, s);
                    for (int64_t i = 0; i < s; ++i)
                      gx[r * s + i] += y[i] * (g[i] - dot);
                  }
                });
  }
  return out;
}

Tensor global_avg_spatial(const Tensor& x) {
  FEF_CHECK(x.rank() == 5, "global_avg_spatial: want (B,C,D,H,W)");
  int64_t bc = x.dim(0) * x.dim(1);
  int64_t s = x.numel() / bc;
  Tensor out(Shape{x.dim(0), x.dim(1), 1, 1, 1});
  for (int64_t r = 0; r < bc; ++r)
    out.data()[r] = K().sum(x.data() + r * s, s) / static_cast<real_t>(s);
  if (grad_active({x})) {
    record_node("global_avg_spatial", {x}, {out},
                [xi = x.impl, oi = out.impl, bc, s] {
                  if (!holds_grad(oi) || !xi->needs_grad) return;
                  auto& gx = ensure_grad(xi);
                  for (int64_t r = 0; r < bc; ++r) {
                    real_t g = oi->grad[r] / static_cast<real_t>(s);
                    real_t* dst = gx.data() + r * s;
                    for (int64_t i = 0; i < s; ++i) dst[i] += g;
                  }
                });
  }
  return out;
}

Tensor avg_over_channels(const Tensor& x) {
  FEF_CHECK(x.rank() >= 3, "avg_over_channels: want (B,C,spatial...)");
  int64_t B = x.dim(0), C = x.dim(1);
  int64_t s = x.numel() / (B * C);
  Shape os = x.shape();
  os[1] = 1;
  Tensor out(os);
  for (int64_t b = 0; b < B; ++b) {
    real_t* orow = out.data() + b * s;
    std::fill(orow, orow + s, real_t(0));
    for (int64_t c = 0; c < C; ++c)
      K().axpy(orow, real_t(1) / static_cast<real_t>(C),
               x.data() + (b * C + c) * s, s);
  }
  if (grad_active({x})) {
    record_node("avg_over_channels", {x}, {out},
                [xi = x.impl, oi = out.impl, B, C, s] {
                  if (!holds_grad(oi) || !xi->needs_grad) return;
                  auto& gx = ensure_grad(xi);
                  for (int64_t b = 0; b < B; ++b)
                    for (int64_t c = 0; c < C; ++c)
                      K().axpy(gx.data() + (b * C + c) * s,
                               real_t(1) / static_cast<real_t>(C),
                               oi->grad.data() + b * s, s);
                });
  }
  return out;
}

Tensor max_over_channels(const Tensor& x) {
  FEF_CHECK(x.rank() >= 3, "max_over_channels: want (B,C,spatial...)");
  int64_t B = x.dim(0), C = x.dim(1);
  int64_t s = x.numel() / (B * C);
  Shape os = x.shape();
  os[1] = 1;
  Tensor out(os);
  std::vector<int32_t> argmax(B * s);
  for (int64_t b = 0; b < B; ++b)
    for (int64_t i = 0; i < s; ++i) {
      real_t best = x.data()[(b * C) * s + i];
      int32_t bc = 0;
      for (int64_t c = 1; c < C; ++c) {
        real_t v = x.data()[(b * C + c) * s + i];
        if (v > best) {
          best = v;
          bc = static_cast<int32_t>(c);
        }
      }
      out.data()[b * s + i] = best;
      argmax[b * s + i] = bc;
    }
  if (grad_active({x})) {
    record_node("max_over_channels", {x}, {out},
                [xi = x.impl, oi = out.impl, am = std::move(argmax), B, C, s] {
                  if (!holds_grad(oi) || !xi->needs_grad) return;
                  auto& gx = ensure_grad(xi);
                  for (int64_t b = 0; b < B; ++b)
                    for (int64_t i = 0; i < s; ++i)
                      gx[(b * C + am[b * s + i]) * s + i] +=
                          oi->grad[b * s + i];
                });
  }
  return out;
}

namespace {
// Per-axis interpolation table for 2x upsampling with half-pixel centers.
struct UpAxis {
  std::vector<int64_t> i0, i1;
  std::vector<real_t> w0, w1;
};
UpAxis up_axis(int64_t in, bool trilinear) {
  UpAxis a;
  int64_t out = in * 2;
  a.i0.resize(out);
  a.i1.resize(out);
  a.w0.resize(out);
  a.w1.resize(out);
  for (int64_t o = 0; o < out; ++o) {
    if (!trilinear) {
      a.i0[o] = o / 2;
      a.i1[o] = o / 2;
      a.w0[o] = 1;
      a.w1[o] = 0;
      continue;
    }
    double src = (static_cast<double>(o) + 0.5) / 2.0 - 0.5;
    int64_t lo = static_cast<int64_t>(std::floor(src));
    double f = src - static_cast<double>(lo);
    int64_t hi = lo + 1;
    if (lo < 0) lo = 0;
    if (hi > in - 1) hi = in - 1;
    a.i0[o] = lo;
    a.i1[o] = hi;
    a.w0[o] = static_cast<real_t>(1.0 - f);
    a.w1[o] = static_cast<real_t>(f);
  }
  return a;
}
}  // namespace

Tensor upsample2x(const Tensor& x, Upsample mode) {
  FEF_CHECK(x.rank() == 5, "upsample2x: want (B,C,D,H,W)");
  int64_t B = x.dim(0), C = x.dim(1), D = x.dim(2), H = x.dim(3),
          W = x.dim(4);
  bool tri = (mode == Upsample::Trilinear);
  UpAxis ad = up_axis(D, tri), ah = up_axis(H, tri), aw = up_axis(W, tri);
  Tensor out(Shape{B, C, 2 * D, 2 * H, 2 * W});
  int64_t ivol = D * H * W, ovol = 8 * ivol;
  parallel_for(B * C, [&](int64_t bc) {
    const real_t* xs = x.data() + bc * ivol;
    real_t* o = out.data() + bc * ovol;
    for (int64_t od = 0; od < 2 * D; ++od)
      for (int64_t oh = 0; oh < 2 * H; ++oh)
        for (int64_t ow = 0; ow < 2 * W; ++ow) {
          real_t acc = 0;
          for (int cd = 0; cd < 2; ++cd) {
            int64_t id = cd ? ad.i1[od] : ad.i0[od];
            real_t wd = cd ? ad.w1[od] : ad.w0[od];
            if (wd == real_t(0)) continue;
            for (int ch = 0; ch < 2; ++ch) {
              int64_t ih = ch ? ah.i1[oh] : ah.i0[oh];
              real_t wh = ch ? ah.w1[oh] : ah.w0[oh];
              if (wh == real_t(0)) continue;
              for (int cw = 0; cw < 2; ++cw) {
                int64_t iw = cw ? aw.i1[ow] : aw.i0[ow];
                real_t ww = cw ? aw.w1[ow] : aw.w0[ow];
                if (ww == real_t(0)) continue;
                acc += wd * wh * ww * xs[(id * H + ih) * W + iw];
              }
            }
          }
          o[(od * 2 * H + oh) * 2 * W + ow] = acc;
        }
  });
  if (grad_active({x})) {
    record_node(
        "upsample2x", {x}, {out},
        [xi = x.impl, oi = out.impl, ad, ah, aw, B, C, D, H, W, ivol, ovol] {
          if (!holds_grad(oi) || !xi->needs_grad) return;
          auto& gx = ensure_grad(xi);
          for (int64_t bc = 0; bc < B * C; ++bc) {
            const real_t* g = oi->grad.data() + bc * ovol;
            real_t* dst = gx.data() + bc * ivol;
            for (int64_t od = 0; od < 2 * D; ++od)
              for (int64_t oh = 0; oh < 2 * H; ++oh)
                for (int64_t ow = 0; ow < 2 * W; ++ow) {
                  real_t gv = g[(od * 2 * H + oh) * 2 * W + ow];
                  if (gv == real_t(0)) continue;
                  for (int cd = 0; cd < 2; ++cd) {
                    int64_t id = cd ? ad.i1[od] : ad.i0[od];
                    real_t wd = cd ? ad.w1[od] : ad.w0[od];
                    if (wd == real_t(0)) continue;
                    for (int ch = 0; ch < 2; ++ch) {
                      int64_t ih = ch ? ah.i1[oh] : ah.i0[oh];
                      real_t wh = ch ? ah.w1[oh] : ah.w0[oh];
                      if (wh == real_t(0)) continue;
                      for (int cw = 0; cw < 2; ++cw) {
                        int64_t iw = cw ? aw.i1[ow] : aw.i0[ow];
                        real_t ww = cw ? aw.w1[ow] : aw.w0[ow];
                        if (ww == real_t(0)) continue;
                        dst[(id * H + ih) * W + iw] += gv * wd * wh * ww;
                      }
                    }
                  }
                }
          }
        });
  }
  return out;
}

Tensor dropout(const Tensor& x, double rate, Rng& rng) {
  FEF_CHECK(rate >= 0 && rate < 1, "dropout: rate must be in [0,1)");
  if (rate == 0.0) return x;  // identity on the tape
  Tensor mask(x.shape());
  real_t keep = static_cast<real_t>(1.0 - rate);
  for (int64_t i = 0; i < mask.numel(); ++i)
    mask.data()[i] = rng.bernoulli(1.0 - rate) ? real_t(1) / keep : real_t(0);
  return mul_mask(x, mask);
}

Tensor to_channel_last(const Tensor& x) {
  FEF_CHECK(x.rank() == 5, "to_channel_last: want rank 5");
  return permute(x, {0, 2, 3, 4, 1});
}

Tensor to_channel_first(const Tensor& x) {
  FEF_CHECK(x.rank() == 5, "to_channel_first: want rank 5");
  return permute(x, {0, 4, 1, 2, 3});
}

}  // namespace fef
