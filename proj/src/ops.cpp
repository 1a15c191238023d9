#include "fef/ops.hpp"

#include <numeric>

#include "fef/kernels.hpp"

namespace fef {

namespace {
const kernels::Ops& K() { return kernels::ops(); }

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  FEF_CHECK(a.shape() == b.shape(), op, ": shape mismatch ",
            shape_str(a.shape()), " vs ", shape_str(b.shape()));
}
}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor out(a.shape());
  K().add(out.data(), a.data(), b.data(), a.numel());
  if (grad_active({a, b})) {
    record_node("add", {a, b}, {out},
                [ai = a.impl, bi = b.impl, oi = out.impl] {
                  if (!holds_grad(oi)) return;
                  const auto& g = oi->grad;
                  if (ai->needs_grad)
                    K().axpy(ensure_grad(ai).data(), 1, g.data(), g.size());
                  if (bi->needs_grad)
                    K().axpy(ensure_grad(bi).data(), 1, g.data(), g.size());
                });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  Tensor out(a.shape());
  K().sub(out.data(), a.data(), b.data(), a.numel());
  if (grad_active({a, b})) {
    record_node("sub", {a, b}, {out},
                [ai = a.impl, bi = b.impl, oi = out.impl] {
                  if (!holds_grad(oi)) return;
                  const auto& g = oi->grad;
                  if (ai->needs_grad)
                    K().axpy(ensure_grad(ai).data(), 1, g.data(), g.size());
                  if (bi->needs_grad)
                    K().axpy(ensure_grad(bi).data(), -1, g.data(), g.size());
                });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  Tensor out(a.shape());
  K().mul(out.data(), a.data(), b.data(), a.numel());
  if (grad_active({a, b})) {
    record_node("mul", {a, b}, {out},
                [ai = a.impl, bi = b.impl, oi = out.impl] {
                  if (!holds_grad(oi)) return;
                  const auto& g = oi->grad;
                  if (ai->needs_grad)
                    K().addmul(ensure_grad(ai).data(), g.data(),
                               bi->data.data(), g.size());
                  if (bi->needs_grad)
                    K().addmul(ensure_grad(bi).data(), g.data(),
                               ai->data.data(), g.size());
                });
  }
  return out;
}

Tensor neg(const Tensor& a) { return scale(a, real_t(-1)); }

Tensor scale(const Tensor& a, real_t s) {
  Tensor out(a.shape());
  K().scale(out.data(), a.data(), s, a.numel());
  if (grad_active({a})) {
    record_node("scale", {a}, {out}, [ai = a.impl, oi = out.impl, s] {
      if (!holds_grad(oi)) return;
      if (ai->needs_grad)
        K().axpy(ensure_grad(ai).data(), s, oi->grad.data(), oi->grad.size());
    });
  }
  return out;
}

Tensor add_scalar(const Tensor& a, real_t s) {
  Tensor out(a.shape());
  for (int64_t i = 0; i < a.numel(); ++i) out.data()[i] = a.data()[i] + s;
  if (grad_active({a})) {
    record_node("add_scalar", {a}, {out}, [ai = a.impl, oi = out.impl] {
      if (!holds_grad(oi)) return;
      if (ai->needs_grad)
        K().axpy(ensure_grad(ai).data(), 1, oi->grad.data(), oi->grad.size());
    });
  }
  return out;
}

Tensor sum_all(const Tensor& a) {
  Tensor out = Tensor::scalar(K().sum(a.data(), a.numel()));
  if (grad_active({a})) {
    record_node("sum_all", {a}, {out}, [ai = a.impl, oi = out.impl] {
      if (!holds_grad(oi)) return;
      if (!ai->needs_grad) return;
      real_t g = oi->grad[0];
      auto& ga = ensure_grad(ai);
      for (auto& v : ga) v += g;
    });
  }
  return out;
}

Tensor sum_trailing(const Tensor& a, int n_keep) {
  FEF_CHECK(n_keep >= 0 && n_keep <= a.rank(), "sum_trailing: bad n_keep");
  Shape out_shape(a.shape().begin(), a.shape().begin() + n_keep);
  int64_t rows = numel(out_shape);
  int64_t cols = a.numel() / std::max<int64_t>(rows, 1);
  Tensor out(out_shape);
  for (int64_t r = 0; r < rows; ++r)
    out.data()[r] = K().sum(a.data() + r * cols, cols);
  if (grad_active({a})) {
    record_node("sum_trailing", {a}, {out},
                [ai = a.impl, oi = out.impl, rows, cols] {
                  if (!holds_grad(oi) || !ai->needs_grad) return;
                  auto& ga = ensure_grad(ai);
                  for (int64_t r = 0; r < rows; ++r) {
                    real_t g = oi->grad[r];
                    real_t* dst = ga.data() + r * cols;
                    for (int64_t c = 0; c < cols; ++c) dst[c] += g;
                  }
                });
  }
  return out;
}

Tensor mul_mask(const Tensor& x, const Tensor& mask) {
  int64_t m = mask.numel();
  FEF_CHECK(x.numel() % m == 0 && x.numel() > 0,
            "mul_mask: mask does not tile input");
  int64_t reps = x.numel() / m;
  Tensor out(x.shape());
  for (int64_t r = 0; r < reps; ++r)
    K().mul(out.data() + r * m, x.data() + r * m, mask.data(), m);
  if (grad_active({x})) {
    record_node("mul_mask", {x, mask}, {out},
                [xi = x.impl, mi = mask.impl, oi = out.impl, reps, m] {
                  if (!holds_grad(oi) || !xi->needs_grad) return;
                  auto& gx = ensure_grad(xi);
                  for (int64_t r = 0; r < reps; ++r)
                    K().addmul(gx.data() + r * m, oi->grad.data() + r * m,
                               mi->data.data(), m);
                });
  }
  return out;
}

Tensor mul_channel_weight(const Tensor& x, const Tensor& w) {
  FEF_CHECK(x.rank() >= 2 && w.rank() == 2 && x.dim(0) == w.dim(0) &&
                x.dim(1) == w.dim(1),
            "mul_channel_weight: want x(B,C,...), w(B,C)");
  int64_t bc = w.numel();
  int64_t s = x.numel() / bc;
  Tensor out(x.shape());
  for (int64_t i = 0; i < bc; ++i)
    K().scale(out.data() + i * s, x.data() + i * s, w.data()[i], s);
  if (grad_active({x, w})) {
    record_node("mul_channel_weight", {x, w}, {out},
                [xi = x.impl, wi = w.impl, oi = out.impl, bc, s] {
                  if (!holds_grad(oi)) return;
                  const auto& g = oi->grad;
                  if (xi->needs_grad) {
                    auto& gx = ensure_grad(xi);
                    for (int64_t i = 0; i < bc; ++i)
                      K().axpy(gx.data() + i * s, wi->data[i],
                               g.data() + i * s, s);
                  }
                  if (wi->needs_grad) {
                    auto& gw = ensure_grad(wi);
                    for (int64_t i = 0; i < bc; ++i)
                      gw[i] += K().dot(g.data() + i * s,
                                       xi->data.data() + i * s, s);
                  }
                });
  }
  return out;
}

Tensor mul_spatial_map(const Tensor& x, const Tensor& m) {
  FEF_CHECK(x.rank() == m.rank() && m.dim(1) == 1 && x.dim(0) == m.dim(0),
            "mul_spatial_map: want x(B,C,...), m(B,1,...)");
  int64_t b_n = x.dim(0), c_n = x.dim(1);
  int64_t s = x.numel() / (b_n * c_n);
  FEF_CHECK(m.numel() == b_n * s, "mul_spatial_map: spatial mismatch");
  Tensor out(x.shape());
  for (int64_t b = 0; b < b_n; ++b) {
    const real_t* mp = m.data() + b * s;
    for (int64_t c = 0; c < c_n; ++c) {
      int64_t off = (b * c_n + c) * s;
      K().mul(out.data() + off, x.data() + off, mp, s);
    }
  }
  if (grad_active({x, m})) {
    record_node(
        "mul_spatial_map", {x, m}, {out},
        [xi = x.impl, mi = m.impl, oi = out.impl, b_n, c_n, s] {
          if (!holds_grad(oi)) return;
          const auto& g = oi->grad;
          if (xi->needs_grad) {
            auto& gx = ensure_grad(xi);
            for (int64_t b = 0; b < b_n; ++b)
              for (int64_t c = 0; c < c_n; ++c) {
                int64_t off = (b * c_n + c) * s;
                K().addmul(gx.data() + off, g.data() + off,
                           mi->data.data() + b * s, s);
              }
          }
          if (mi->needs_grad) {
            auto& gm = ensure_grad(mi);
            for (int64_t b = 0; b < b_n; ++b)
              for (int64_t c = 0; c < c_n; ++c) {
                int64_t off = (b * c_n + c) * s;
                K().addmul(gm.data() + b * s, g.data() + off,
                           xi->data.data() + off, s);
              }
          }
        });
  }
  return out;
}

namespace {
// Strides for row-major traversal around a given axis: (outer, axis extent,
// inner) such that flat = (o * extent + a) * inner + i.
struct AxisView {
  int64_t outer, extent, inner;
};
AxisView axis_view(const Shape& s, int axis) {
  AxisView v{1, s[axis], 1};
  for (int i = 0; i < axis; ++i) v.outer *= s[i];
  for (size_t i = axis + 1; i < s.size(); ++i) v.inner *= s[i];
  return v;
}
}  // namespace

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  FEF_CHECK(!parts.empty(), "concat: empty input list");
  Shape out_shape = parts[0].shape();
  FEF_CHECK(axis >= 0 && axis < static_cast<int>(out_shape.size()),
            "concat: bad axis");
  int64_t total = 0;
  for (const Tensor& p : parts) {
    FEF_CHECK(p.rank() == parts[0].rank(), "concat: rank mismatch");
    for (int i = 0; i < p.rank(); ++i)
      if (i != axis)
        FEF_CHECK(p.dim(i) == out_shape[i], "concat: extent mismatch off-axis");
    total += p.dim(axis);
  }
  out_shape[axis] = total;
  Tensor out(out_shape);
  AxisView ov = axis_view(out_shape, axis);
  int64_t at = 0;
  for (const Tensor& p : parts) {
    AxisView pv = axis_view(p.shape(), axis);
    for (int64_t o = 0; o < ov.outer; ++o) {
      const real_t* src = p.data() + o * pv.extent * pv.inner;
      real_t* dst = out.data() + (o * ov.extent + at) * ov.inner;
      std::copy(src, src + pv.extent * pv.inner, dst);
    }
    at += pv.extent;
  }
  bool any_grad = false;
  for (const Tensor& p : parts) any_grad = any_grad || p.needs_grad();
  if (Tape::current() && any_grad) {
    std::vector<std::shared_ptr<TensorImpl>> ins;
    for (const Tensor& p : parts) ins.push_back(p.impl);
    TapeNode node;
    node.name = "concat";
    node.inputs = ins;
    node.outputs = {out.impl};
    out.impl->needs_grad = true;
    out.impl->tape = Tape::current();
    auto oi = out.impl;
    node.backward = [ins, oi, ov, axis] {
      if (!holds_grad(oi)) return;
      int64_t at2 = 0;
      for (const auto& pi : ins) {
        AxisView pv = axis_view(pi->shape, axis);
        if (pi->needs_grad) {
          auto& gp = ensure_grad(pi);
          for (int64_t o = 0; o < ov.outer; ++o) {
            const real_t* src = oi->grad.data() + (o * ov.extent + at2) * ov.inner;
            kernels::ops().axpy(gp.data() + o * pv.extent * pv.inner, 1, src,
                                pv.extent * pv.inner);
          }
        }
        at2 += pv.extent;
      }
    };
    record_node_raw(std::move(node));
  }
  return out;
}

Tensor slice(const Tensor& x, int axis, int64_t start, int64_t len) {
  FEF_CHECK(axis >= 0 && axis < x.rank(), "slice: bad axis");
  FEF_CHECK(start >= 0 && len > 0 && start + len <= x.dim(axis),
            "slice: range [", start, ",", start + len, ") out of extent ",
            x.dim(axis));
  Shape out_shape = x.shape();
  out_shape[axis] = len;
  Tensor out(out_shape);
  AxisView xv = axis_view(x.shape(), axis);
  for (int64_t o = 0; o < xv.outer; ++o) {
    const real_t* src = x.data() + (o * xv.extent + start) * xv.inner;
    real_t* dst = out.data() + o * len * xv.inner;
    std::copy(src, src + len * xv.inner, dst);
  }
  if (grad_active({x})) {
    record_node("slice", {x}, {out},
                [xi = x.impl, oi = out.impl, xv, start, len] {
                  if (!holds_grad(oi) || !xi->needs_grad) return;
                  auto& gx = ensure_grad(xi);
                  for (int64_t o = 0; o < xv.outer; ++o) {
                    const real_t* src = oi->grad.data() + o * len * xv.inner;
                    real_t* dst = gx.data() + (o * xv.extent + start) * xv.inner;
                    kernels::ops().axpy(dst, 1, src, len * xv.inner);
                  }
                });
  }
  return out;
}

namespace {
void permute_copy(const Shape& in_shape, const real_t* src,
                  const std::vector<int>& axes, real_t* dst) {
  int r = static_cast<int>(in_shape.size());
  Shape out_shape(r);
  for (int i = 0; i < r; ++i) out_shape[i] = in_shape[axes[i]];
  std::vector<int64_t> in_strides(r, 1), out_strides(r, 1);
  for (int i = r - 2; i >= 0; --i)
    in_strides[i] = in_strides[i + 1] * in_shape[i + 1];
  for (int i = r - 2; i >= 0; --i)
    out_strides[i] = out_strides[i + 1] * out_shape[i + 1];
  // walk output in order, pull from input
  std::vector<int64_t> idx(r, 0);
  int64_t n = numel(in_shape);
  for (int64_t flat = 0; flat < n; ++flat) {
    int64_t src_flat = 0;
    for (int i = 0; i < r; ++i) src_flat += idx[i] * in_strides[axes[i]];
    dst[flat] = src[src_flat];
    for (int i = r - 1; i >= 0; --i) {
      if (++idx[i] < out_shape[i]) break;
      idx[i] = 0;
    }
  }
}
}  // namespace

Tensor permute(const Tensor& x, const std::vector<int>& axes) {
  FEF_CHECK(static_cast<int>(axes.size()) == x.rank(), "permute: rank mismatch");
  Shape out_shape(x.rank());
  for (int i = 0; i < x.rank(); ++i) out_shape[i] = x.dim(axes[i]);
  Tensor out(out_shape);
  permute_copy(x.shape(), x.data(), axes, out.data());
  if (grad_active({x})) {
    std::vector<int> inv(axes.size());
    for (size_t i = 0; i < axes.size(); ++i) inv[axes[i]] = static_cast<int>(i);
    record_node("permute", {x}, {out},
                [xi = x.impl, oi = out.impl, inv, out_shape] {
                  if (!holds_grad(oi) || !xi->needs_grad) return;
                  std::vector<real_t> gsrc(oi->grad.size());
                  permute_copy(out_shape, oi->grad.data(), inv, gsrc.data());
                  kernels::ops().axpy(ensure_grad(xi).data(), 1, gsrc.data(),
                                      gsrc.size());
                });
  }
  return out;
}

Tensor reshape(const Tensor& x, const Shape& new_shape) {
  FEF_CHECK(numel(new_shape) == x.numel(), "reshape: element count mismatch ",
            shape_str(x.shape()), " -> ", shape_str(new_shape));
  Tensor out(new_shape, x.vec());
  if (grad_active({x})) {
    record_node("reshape", {x}, {out}, [xi = x.impl, oi = out.impl] {
      if (!holds_grad(oi) || !xi->needs_grad) return;
      kernels::ops().axpy(ensure_grad(xi).data(), 1, oi->grad.data(),
                          oi->grad.size());
    });
  }
  return out;
}

}  // namespace fef
