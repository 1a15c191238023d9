#pragma once

#include <vector>

#include "fef/tensor.hpp"

namespace fef {

// Elementwise (equal shapes).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, real_t s);
Tensor add_scalar(const Tensor& a, real_t s);

// Reductions.
Tensor sum_all(const Tensor& a);                   // -> rank-0 scalar
Tensor sum_trailing(const Tensor& a, int n_keep);  // sum all axes after the
                                                   // first n_keep

// Broadcast products.
// mask has the trailing shape of x and never receives gradient.
Tensor mul_mask(const Tensor& x, const Tensor& mask);
// x: (B,C,spatial...), w: (B,C)
Tensor mul_channel_weight(const Tensor& x, const Tensor& w);
// x: (B,C,spatial...), m: (B,1,spatial...)
Tensor mul_spatial_map(const Tensor& x, const Tensor& m);

// Shape surgery (all produce fresh storage).
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& x, int axis, int64_t start, int64_t len);
Tensor permute(const Tensor& x, const std::vector<int>& axes);
Tensor reshape(const Tensor& x, const Shape& new_shape);

}  // namespace fef
