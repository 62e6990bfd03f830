#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace fedadg {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& s);
std::string shape_str(const Shape& s);

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // allocated on demand; same length as data
  bool requires_grad = false;
};

// Dense row-major array of 64-bit floats with an optional gradient buffer.
// Value-semantic handle: copies share the underlying storage, which is what
// parameter tensors want (the optimizer and the network see the same buffer).
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t size() const;
  std::size_t rows() const;  // rank-2 only
  std::size_t cols() const;
  bool requires_grad() const;
  double item() const;  // single-element tensors only

  std::vector<double>& values();
  const std::vector<double>& values() const;

  // Gradient buffer. Accessing it on a tensor without requires_grad throws.
  std::vector<double>& grad();
  const std::vector<double>& grad() const;
  bool grad_allocated() const;
  void zero_grad();

  TensorImpl* node() const { return impl_.get(); }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;

  friend class Tape;
};

// Records primitive operations in execution order (which is a topological
// order by construction) and replays their backward rules in reverse.
//
// Adjoints live in per-pass buffers keyed by node; only tensors that were
// NOT produced on this tape (the leaves, i.e. parameters and inputs) have
// the pass result added into their persistent grad buffer. Repeated
// backward() calls therefore accumulate leaf gradients; call zero_grad (or
// sgd_step, which zeroes after applying) between steps.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void backward(const Tensor& loss);

  std::size_t num_entries() const { return entries_.size(); }
  bool produced(const Tensor& t) const { return produced_.count(t.node()) > 0; }

  // Recording interface, used by the ops below.
  void record(std::function<void(Tape&)> rule, const Tensor& output);
  std::vector<double>& adjoint(const Tensor& t);
  const std::vector<double>* find_adjoint(const Tensor& t) const;

 private:
  struct Entry {
    std::function<void(Tape&)> rule;
  };
  std::vector<Entry> entries_;
  std::unordered_set<const TensorImpl*> produced_;
  std::unordered_map<const TensorImpl*, std::vector<double>> adjoints_;
  std::vector<std::shared_ptr<TensorImpl>> outputs_;  // keeps produced_ keys alive
};

// Primitive ops. `tape == nullptr` evaluates values only (no recording, the
// result does not require grad); otherwise an op records its backward rule
// when at least one input requires grad. Shapes must match exactly: there is
// no broadcasting anywhere, only the explicit tile_rows below.
namespace ops {

Tensor matmul(Tape* tape, const Tensor& a, const Tensor& b);
Tensor add(Tape* tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape* tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape* tape, const Tensor& a, const Tensor& b);
Tensor square(Tape* tape, const Tensor& a);
Tensor mean(Tape* tape, const Tensor& a);  // full reduction to a scalar
Tensor sum(Tape* tape, const Tensor& a);   // full reduction to a scalar
Tensor relu(Tape* tape, const Tensor& a);
Tensor softmax(Tape* tape, const Tensor& a);  // row-wise, max-stabilized
Tensor log(Tape* tape, const Tensor& a);      // domain error on x <= 0
Tensor logistic(Tape* tape, const Tensor& a);
Tensor clamp_min(Tape* tape, const Tensor& a, double floor);
Tensor scale(Tape* tape, const Tensor& a, double factor);
Tensor concat_cols(Tape* tape, const Tensor& a, const Tensor& b);
Tensor tile_rows(Tape* tape, const Tensor& row, std::size_t copies);

// Value copy that is cut off from the graph: never records, carries no grad.
Tensor detach(const Tensor& a);

}  // namespace ops

// p <- p - lr * grad(p), then grads are zeroed. Throws if a parameter has no
// gradient buffer (backward never reached it and zero_grads was not called).
void sgd_step(std::span<Tensor> params, double lr);

// Allocates (if needed) and zeroes gradient buffers.
void zero_grads(std::span<Tensor> params);

}  // namespace fedadg
