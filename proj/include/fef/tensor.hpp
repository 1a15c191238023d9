#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "fef/common.hpp"
#include "fef/rng.hpp"

namespace fef {

class Tape;

struct TensorImpl {
  Shape shape;
  std::vector<real_t> data;
  std::vector<real_t> grad;  // empty until backward touches it
  bool requires_grad = false;
  bool needs_grad = false;  // requires_grad, or derived from such an input
  Tape* tape = nullptr;     // tape of the node that produced it
};

// Dense real tensor with shared value semantics: copies are cheap handles to
// the same storage. Values are immutable after an op produces them; only the
// grad accumulator is written later.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape)
      : impl(std::make_shared<TensorImpl>()) {
    impl->shape = std::move(shape);
    impl->data.assign(numel(impl->shape), real_t(0));
  }
  Tensor(Shape shape, std::vector<real_t> values)
      : impl(std::make_shared<TensorImpl>()) {
    FEF_CHECK(numel(shape) == static_cast<int64_t>(values.size()),
              "shape/data mismatch: ", shape_str(shape), " vs ",
              values.size(), " values");
    impl->shape = std::move(shape);
    impl->data = std::move(values);
  }

  static Tensor zeros(const Shape& s) { return Tensor(s); }
  static Tensor full(const Shape& s, real_t v) {
    Tensor t(s);
    for (auto& x : t.impl->data) x = v;
    return t;
  }
  static Tensor scalar(real_t v) { return Tensor(Shape{}, {v}); }

  bool defined() const { return impl != nullptr; }
  const Shape& shape() const { return impl->shape; }
  int64_t numel() const { return static_cast<int64_t>(impl->data.size()); }
  int64_t dim(int i) const { return impl->shape.at(i); }
  int rank() const { return static_cast<int>(impl->shape.size()); }

  real_t* data() { return impl->data.data(); }
  const real_t* data() const { return impl->data.data(); }
  std::vector<real_t>& vec() { return impl->data; }
  const std::vector<real_t>& vec() const { return impl->data; }
  real_t item() const {
    FEF_CHECK(numel() == 1, "item() on tensor of ", numel(), " values");
    return impl->data[0];
  }

  Tensor& set_requires_grad(bool b = true) {
    impl->requires_grad = b;
    impl->needs_grad = impl->needs_grad || b;
    return *this;
  }
  bool requires_grad() const { return impl->requires_grad; }
  bool needs_grad() const { return impl->needs_grad; }

  bool has_grad() const { return !impl->grad.empty(); }
  const std::vector<real_t>& grad() const {
    FEF_CHECK(has_grad(), "gradient not populated");
    return impl->grad;
  }
  Tensor grad_tensor() const { return Tensor(impl->shape, grad()); }
  void clear_grad() { impl->grad.clear(); }

  // Detached deep copy (no tape lineage, no grad flag).
  Tensor detached_copy() const { return Tensor(impl->shape, impl->data); }

  void check_finite(const char* what) const;

  std::shared_ptr<TensorImpl> impl;
};

// Complex values as split re/im planes. Both planes are ordinary tensors, so
// complex arithmetic other than the transforms differentiates through the
// real ops that implement it.
struct ComplexTensor {
  Tensor re, im;
  const Shape& shape() const { return re.shape(); }
};

struct TapeNode {
  const char* name;
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  std::vector<std::shared_ptr<TensorImpl>> outputs;
  std::function<void()> backward;
};

// Append-only record of the forward pass. Constructing a Tape makes it the
// active tape for the current thread; ops record while one is active. One
// backward sweep consumes it.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* current();

  size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

 private:
  std::vector<TapeNode> nodes_;
  bool consumed_ = false;

  friend void backward(const Tensor&, Tape&);
  friend void record_node(const char*, std::initializer_list<Tensor>,
                          std::initializer_list<Tensor>,
                          std::function<void()>);
  friend void record_node_raw(TapeNode);
};

// Suspends recording for its scope (numeric probes, inference).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  Tape* saved_;
};

// True when a tape is active and any input carries gradient lineage.
bool grad_active(std::initializer_list<Tensor> inputs);

// Appends a node; marks outputs as tape-produced.
void record_node(const char* name, std::initializer_list<Tensor> inputs,
                 std::initializer_list<Tensor> outputs,
                 std::function<void()> backward_fn);

// Variant for ops with dynamic input/output lists. Caller must have set
// needs_grad/tape on the outputs already.
void record_node_raw(TapeNode node);

// Grad accumulation helpers for backward lambdas.
std::vector<real_t>& ensure_grad(const std::shared_ptr<TensorImpl>& t);
inline bool holds_grad(const std::shared_ptr<TensorImpl>& t) {
  return !t->grad.empty();
}

// Reverse sweep from a scalar loss produced through `tape`. Fills grad of
// every requires_grad leaf reachable from the loss. Errors: non-scalar loss,
// loss not produced through this tape, tape already consumed.
void backward(const Tensor& loss, Tape& tape);

// Random initializers (deterministic under the caller's Rng).
Tensor randn(const Shape& s, Rng& rng, double stddev = 1.0);
Tensor rand_uniform(const Shape& s, Rng& rng, double lo = 0.0, double hi = 1.0);
Tensor truncated_normal(const Shape& s, Rng& rng, double stddev);

}  // namespace fef
