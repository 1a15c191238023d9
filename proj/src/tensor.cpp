#include "fef/tensor.hpp"

#include <cmath>

namespace fef {

namespace {
thread_local std::vector<Tape*> t_tape_stack;
}

void Tensor::check_finite(const char* what) const {
  for (int64_t i = 0; i < numel(); ++i) {
    if (!std::isfinite(impl->data[i]))
      throw Error(detail::msg("non-finite value in ", what, " at flat index ",
                              i, " (", impl->data[i], ")"));
  }
}

Tape::Tape() { t_tape_stack.push_back(this); }

Tape::~Tape() {
  if (!t_tape_stack.empty() && t_tape_stack.back() == this)
    t_tape_stack.pop_back();
}

Tape* Tape::current() {
  return t_tape_stack.empty() ? nullptr : t_tape_stack.back();
}

NoGradGuard::NoGradGuard() : saved_(Tape::current()) {
  t_tape_stack.push_back(nullptr);
}

NoGradGuard::~NoGradGuard() {
  if (!t_tape_stack.empty()) t_tape_stack.pop_back();
  (void)saved_;
}

bool grad_active(std::initializer_list<Tensor> inputs) {
  if (!Tape::current()) return false;
  for (const Tensor& t : inputs)
    if (t.defined() && t.needs_grad()) return true;
  return false;
}

void record_node(const char* name, std::initializer_list<Tensor> inputs,
                 std::initializer_list<Tensor> outputs,
                 std::function<void()> backward_fn) {
  Tape* tape = Tape::current();
  FEF_CHECK(tape, "record_node without an active tape");
  TapeNode node;
  node.name = name;
  for (const Tensor& t : inputs) node.inputs.push_back(t.impl);
  for (const Tensor& t : outputs) {
    t.impl->needs_grad = true;
    t.impl->tape = tape;
    node.outputs.push_back(t.impl);
  }
  node.backward = std::move(backward_fn);
  tape->nodes_.push_back(std::move(node));
}

void record_node_raw(TapeNode node) {
  Tape* tape = Tape::current();
  FEF_CHECK(tape, "record_node without an active tape");
  tape->nodes_.push_back(std::move(node));
}

std::vector<real_t>& ensure_grad(const std::shared_ptr<TensorImpl>& t) {
  if (t->grad.empty()) t->grad.assign(t->data.size(), real_t(0));
  return t->grad;
}

void backward(const Tensor& loss, Tape& tape) {
  FEF_CHECK(loss.defined() && loss.numel() == 1,
            "backward requires a scalar loss");
  FEF_CHECK(loss.impl->tape == &tape,
            "loss is detached: it was not produced through this tape");
  FEF_CHECK(!tape.consumed_, "tape already consumed by a previous backward");
  tape.consumed_ = true;

  ensure_grad(loss.impl)[0] = real_t(1);
  for (auto it = tape.nodes_.rbegin(); it != tape.nodes_.rend(); ++it) {
    bool live = false;
    for (const auto& out : it->outputs)
      if (holds_grad(out)) {
        live = true;
        break;
      }
    if (live) it->backward();
  }
}

Tensor randn(const Shape& s, Rng& rng, double stddev) {
  Tensor t(s);
  for (auto& v : t.vec()) v = static_cast<real_t>(rng.normal(0.0, stddev));
  return t;
}

Tensor rand_uniform(const Shape& s, Rng& rng, double lo, double hi) {
  Tensor t(s);
  for (auto& v : t.vec()) v = static_cast<real_t>(rng.uniform(lo, hi));
  return t;
}

Tensor truncated_normal(const Shape& s, Rng& rng, double stddev) {
  Tensor t(s);
  for (auto& v : t.vec()) v = static_cast<real_t>(rng.truncated_normal(stddev));
  return t;
}

}  // namespace fef
