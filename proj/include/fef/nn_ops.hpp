#pragma once

#include "fef/ops.hpp"
#include "fef/tensor.hpp"

namespace fef {

// ---------------------------------------------------------------------------
// Convolutions. Cross-correlation semantics, zero padding, cubic kernels.
// Weight layout: (Cout, Cin/groups, k,k,k); transposed: (Cin, Cout/groups,
// k,k,k). groups == in_channels gives depthwise.
// ---------------------------------------------------------------------------

struct ConvSpec {
  int64_t in_channels = 0;
  int64_t out_channels = 0;
  int64_t kernel = 1;
  int64_t stride = 1;
  int64_t padding = 0;   // same-padding ops use k/2
  int64_t groups = 1;
  bool transposed = false;
  int64_t output_padding = 0;  // transposed only; < stride

  void validate() const;
  Shape weight_shape() const;
  int64_t out_extent(int64_t in) const;
};

Tensor conv3d(const Tensor& x, const ConvSpec& spec, const Tensor& weights,
              const Tensor& bias);

// Per-sample, per-channel depthwise conv with caller-supplied kernels
// (B,C,k,k,k); stride 1, zero padding k/2. Differentiable in x and kernels.
Tensor dynamic_depthwise_conv3d(const Tensor& x, const Tensor& kernels);

// ---------------------------------------------------------------------------
// Pointwise / normalization / pooling layers.
// ---------------------------------------------------------------------------

// x: (..., Cin) channel-trailing. y = x·W + b with W (Cin, Cout), b (Cout).
Tensor linear(const Tensor& x, const Tensor& W, const Tensor& b);

// Channel-trailing layer norm with population variance.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-6);

struct BatchNormState {
  Tensor gamma, beta;          // learnable
  Tensor running_mean, running_var;  // buffers
  double momentum = 0.1;
  double eps = 1e-5;
  // steps recorded; eval before any training update is an error
  int64_t update_count = 0;
};

BatchNormState make_batch_norm(int64_t channels);
// x: (B,C,spatial...). Training mode normalizes with batch statistics and
// updates running stats; eval mode is a per-channel affine from running stats.
Tensor batch_norm(const Tensor& x, BatchNormState& state, bool training);

enum class Act { GELU, ReLU, ReLU6, Sigmoid };
Tensor activation(Act kind, const Tensor& x);
inline Tensor gelu(const Tensor& x) { return activation(Act::GELU, x); }
inline Tensor relu(const Tensor& x) { return activation(Act::ReLU, x); }
inline Tensor relu6(const Tensor& x) { return activation(Act::ReLU6, x); }
inline Tensor sigmoid(const Tensor& x) { return activation(Act::Sigmoid, x); }

// Softmax over the flattened spatial axes per (batch, channel), with
// max subtraction.
Tensor softmax_spatial(const Tensor& x);

// (B,C,spatial...) -> (B,C,1,1,1)
Tensor global_avg_spatial(const Tensor& x);
// (B,C,spatial...) -> (B,1,spatial...)
Tensor avg_over_channels(const Tensor& x);
Tensor max_over_channels(const Tensor& x);

enum class Upsample { Trilinear, Nearest };
// Doubles D,H,W. Trilinear uses half-pixel centers with border clamping.
Tensor upsample2x(const Tensor& x, Upsample mode = Upsample::Trilinear);

// Identity at rate 0 (the default path). Otherwise inverted-dropout mask
// drawn from rng.
Tensor dropout(const Tensor& x, double rate, Rng& rng);

// Channel layout moves for the channel-trailing linear/norm contract.
Tensor to_channel_last(const Tensor& x);   // (B,C,D,H,W) -> (B,D,H,W,C)
Tensor to_channel_first(const Tensor& x);  // (B,D,H,W,C) -> (B,C,D,H,W)

}  // namespace fef
