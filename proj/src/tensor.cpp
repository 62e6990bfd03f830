#include "fedadg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "fedadg/util.hpp"

namespace fedadg {

std::size_t shape_size(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << "x";
    os << s[i];
  }
  os << "]";
  return os.str();
}

namespace {

void check_shape(const Shape& s) {
  if (s.empty()) throw std::invalid_argument("tensor shape must be non-empty");
  for (std::size_t d : s) {
    if (d == 0) {
      throw std::invalid_argument("tensor dimensions must be positive, got " +
                                  shape_str(s));
    }
  }
}

[[noreturn]] void shape_mismatch(const char* op, const Shape& a, const Shape& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                              shape_str(a) + " vs " + shape_str(b));
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  check_shape(shape);
  auto impl = std::make_shared<TensorImpl>();
  impl->data.assign(shape_size(shape), 0.0);
  impl->shape = std::move(shape);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  std::fill(t.values().begin(), t.values().end(), value);
  return t;
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  check_shape(shape);
  if (shape_size(shape) != values.size()) {
    throw std::invalid_argument("tensor data length " +
                                std::to_string(values.size()) +
                                " does not match shape " + shape_str(shape));
  }
  ensure_finite(values, "tensor construction");
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const { return impl_->shape; }
std::size_t Tensor::size() const { return impl_->data.size(); }

std::size_t Tensor::rows() const {
  if (impl_->shape.size() != 2) {
    throw std::logic_error("rows(): tensor is not rank-2, shape " +
                           shape_str(impl_->shape));
  }
  return impl_->shape[0];
}

std::size_t Tensor::cols() const {
  if (impl_->shape.size() != 2) {
    throw std::logic_error("cols(): tensor is not rank-2, shape " +
                           shape_str(impl_->shape));
  }
  return impl_->shape[1];
}

bool Tensor::requires_grad() const { return impl_->requires_grad; }

double Tensor::item() const {
  if (impl_->data.size() != 1) {
    throw std::logic_error("item(): tensor has " +
                           std::to_string(impl_->data.size()) + " elements");
  }
  return impl_->data[0];
}

std::vector<double>& Tensor::values() { return impl_->data; }
const std::vector<double>& Tensor::values() const { return impl_->data; }

std::vector<double>& Tensor::grad() {
  if (!impl_->requires_grad) {
    throw std::logic_error("grad(): tensor does not require grad");
  }
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
  return impl_->grad;
}

const std::vector<double>& Tensor::grad() const {
  return const_cast<Tensor*>(this)->grad();
}

bool Tensor::grad_allocated() const { return !impl_->grad.empty(); }

void Tensor::zero_grad() {
  if (!impl_->requires_grad) return;
  impl_->grad.assign(impl_->data.size(), 0.0);
}

// ---------------------------------------------------------------------------
// Tape

void Tape::record(std::function<void(Tape&)> rule, const Tensor& output) {
  entries_.push_back(Entry{std::move(rule)});
  produced_.insert(output.node());
  outputs_.push_back(output.impl_);
}

std::vector<double>& Tape::adjoint(const Tensor& t) {
  auto it = adjoints_.find(t.node());
  if (it == adjoints_.end()) {
    it = adjoints_.emplace(t.node(), std::vector<double>(t.size(), 0.0)).first;
  }
  return it->second;
}

const std::vector<double>* Tape::find_adjoint(const Tensor& t) const {
  auto it = adjoints_.find(t.node());
  return it == adjoints_.end() ? nullptr : &it->second;
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw std::invalid_argument("backward: loss must be a scalar tensor");
  }
  if (!produced_.count(loss.node())) {
    throw std::invalid_argument("backward: loss was not produced on this tape");
  }
  adjoints_.clear();
  adjoints_[loss.node()] = {1.0};
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    it->rule(*this);
  }
  // Deposit pass results into the persistent grads of the leaves.
  for (auto& [node, adj] : adjoints_) {
    if (!node->requires_grad || produced_.count(node)) continue;
    auto* mut = const_cast<TensorImpl*>(node);
    if (mut->grad.empty()) mut->grad.assign(mut->data.size(), 0.0);
    for (std::size_t i = 0; i < adj.size(); ++i) mut->grad[i] += adj[i];
  }
  adjoints_.clear();
}

// ---------------------------------------------------------------------------
// Ops

namespace ops {
namespace {

bool wants_record(Tape* tape, std::initializer_list<const Tensor*> inputs) {
  if (!tape) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

Tensor result(Shape shape, std::vector<double> values, bool track) {
  Tensor t = Tensor::zeros(std::move(shape), track);
  t.values() = std::move(values);
  return t;
}

// Elementwise binary op scaffold: forward via `fwd`, backward contributions
// via `dA`/`dB` evaluated per element.
template <typename Fwd, typename DA, typename DB>
Tensor binary_elementwise(const char* name, Tape* tape, const Tensor& a,
                          const Tensor& b, Fwd fwd, DA da, DB db) {
  if (a.shape() != b.shape()) shape_mismatch(name, a.shape(), b.shape());
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = fwd(a.values()[i], b.values()[i]);
  }
  bool track = wants_record(tape, {&a, &b});
  Tensor c = result(a.shape(), std::move(out), track);
  if (track) {
    tape->record(
        [a, b, c, da, db](Tape& t) {
          const std::vector<double>* oa = t.find_adjoint(c);
          if (!oa) return;
          if (a.requires_grad()) {
            auto& ga = t.adjoint(a);
            for (std::size_t i = 0; i < ga.size(); ++i) {
              ga[i] += da(a.values()[i], b.values()[i]) * (*oa)[i];
            }
          }
          if (b.requires_grad()) {
            auto& gb = t.adjoint(b);
            for (std::size_t i = 0; i < gb.size(); ++i) {
              gb[i] += db(a.values()[i], b.values()[i]) * (*oa)[i];
            }
          }
        },
        c);
  }
  return c;
}

template <typename Fwd, typename Dx>
Tensor unary_elementwise(Tape* tape, const Tensor& a, Fwd fwd, Dx dx) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(a.values()[i]);
  bool track = wants_record(tape, {&a});
  Tensor c = result(a.shape(), std::move(out), track);
  if (track) {
    tape->record(
        [a, c, dx](Tape& t) {
          const std::vector<double>* oa = t.find_adjoint(c);
          if (!oa || !a.requires_grad()) return;
          auto& ga = t.adjoint(a);
          for (std::size_t i = 0; i < ga.size(); ++i) {
            ga[i] += dx(a.values()[i], c.values()[i]) * (*oa)[i];
          }
        },
        c);
  }
  return c;
}

}  // namespace

Tensor matmul(Tape* tape, const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.cols() != b.rows()) {
    shape_mismatch("matmul", a.shape(), b.shape());
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a.values()[i * k + p];
      for (std::size_t j = 0; j < n; ++j) {
        out[i * n + j] += av * b.values()[p * n + j];
      }
    }
  }
  bool track = wants_record(tape, {&a, &b});
  Tensor c = result({m, n}, std::move(out), track);
  if (track) {
    tape->record(
        [a, b, c, m, k, n](Tape& t) {
          const std::vector<double>* oc = t.find_adjoint(c);
          if (!oc) return;
          if (a.requires_grad()) {
            // dA = dC . B^T
            auto& ga = t.adjoint(a);
            for (std::size_t i = 0; i < m; ++i) {
              for (std::size_t j = 0; j < n; ++j) {
                const double g = (*oc)[i * n + j];
                for (std::size_t p = 0; p < k; ++p) {
                  ga[i * k + p] += g * b.values()[p * n + j];
                }
              }
            }
          }
          if (b.requires_grad()) {
            // dB = A^T . dC
            auto& gb = t.adjoint(b);
            for (std::size_t i = 0; i < m; ++i) {
              for (std::size_t p = 0; p < k; ++p) {
                const double av = a.values()[i * k + p];
                for (std::size_t j = 0; j < n; ++j) {
                  gb[p * n + j] += av * (*oc)[i * n + j];
                }
              }
            }
          }
        },
        c);
  }
  return c;
}

Tensor add(Tape* tape, const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      "add", tape, a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(Tape* tape, const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      "sub", tape, a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(Tape* tape, const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      "mul", tape, a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor square(Tape* tape, const Tensor& a) {
  return unary_elementwise(
      tape, a, [](double x) { return x * x; },
      [](double x, double) { return 2.0 * x; });
}

Tensor relu(Tape* tape, const Tensor& a) {
  return unary_elementwise(
      tape, a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor log(Tape* tape, const Tensor& a) {
  for (double x : a.values()) {
    if (x <= 0.0) {
      throw std::domain_error("log: input must be strictly positive, got " +
                              std::to_string(x));
    }
  }
  return unary_elementwise(
      tape, a, [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Tensor logistic(Tape* tape, const Tensor& a) {
  auto sigma = [](double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
  };
  return unary_elementwise(tape, a, sigma,
                           [](double, double y) { return y * (1.0 - y); });
}

Tensor clamp_min(Tape* tape, const Tensor& a, double floor) {
  // Subgradient 0 on the clamped side.
  return unary_elementwise(
      tape, a, [floor](double x) { return x < floor ? floor : x; },
      [floor](double x, double) { return x < floor ? 0.0 : 1.0; });
}

Tensor scale(Tape* tape, const Tensor& a, double factor) {
  return unary_elementwise(
      tape, a, [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Tensor mean(Tape* tape, const Tensor& a) {
  const std::size_t n = a.size();
  double acc = 0.0;
  for (double x : a.values()) acc += x;
  bool track = wants_record(tape, {&a});
  Tensor c = result({1}, {acc / static_cast<double>(n)}, track);
  if (track) {
    tape->record(
        [a, c, n](Tape& t) {
          const std::vector<double>* oc = t.find_adjoint(c);
          if (!oc || !a.requires_grad()) return;
          const double g = (*oc)[0] / static_cast<double>(n);
          auto& ga = t.adjoint(a);
          for (double& x : ga) x += g;
        },
        c);
  }
  return c;
}

Tensor sum(Tape* tape, const Tensor& a) {
  double acc = 0.0;
  for (double x : a.values()) acc += x;
  bool track = wants_record(tape, {&a});
  Tensor c = result({1}, {acc}, track);
  if (track) {
    tape->record(
        [a, c](Tape& t) {
          const std::vector<double>* oc = t.find_adjoint(c);
          if (!oc || !a.requires_grad()) return;
          const double g = (*oc)[0];
          auto& ga = t.adjoint(a);
          for (double& x : ga) x += g;
        },
        c);
  }
  return c;
}

Tensor softmax(Tape* tape, const Tensor& a) {
  const std::size_t rank = a.shape().size();
  if (rank != 1 && rank != 2) {
    throw std::invalid_argument("softmax: expects rank 1 or 2, got shape " +
                                shape_str(a.shape()));
  }
  const std::size_t m = (rank == 2) ? a.shape()[0] : 1;
  const std::size_t n = (rank == 2) ? a.shape()[1] : a.shape()[0];
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = a.values().data() + i * n;
    double mx = row[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      out[i * n + j] = std::exp(row[j] - mx);
      z += out[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= z;
  }
  bool track = wants_record(tape, {&a});
  Tensor c = result(a.shape(), std::move(out), track);
  if (track) {
    tape->record(
        [a, c, m, n](Tape& t) {
          const std::vector<double>* oc = t.find_adjoint(c);
          if (!oc || !a.requires_grad()) return;
          auto& ga = t.adjoint(a);
          // dx_j = s_j * (dy_j - sum_k dy_k s_k), per row
          for (std::size_t i = 0; i < m; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              dot += (*oc)[i * n + j] * c.values()[i * n + j];
            }
            for (std::size_t j = 0; j < n; ++j) {
              const double s = c.values()[i * n + j];
              ga[i * n + j] += s * ((*oc)[i * n + j] - dot);
            }
          }
        },
        c);
  }
  return c;
}

Tensor concat_cols(Tape* tape, const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.rows() != b.rows()) {
    shape_mismatch("concat_cols", a.shape(), b.shape());
  }
  const std::size_t m = a.rows(), na = a.cols(), nb = b.cols();
  std::vector<double> out(m * (na + nb));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < na; ++j) out[i * (na + nb) + j] = a.values()[i * na + j];
    for (std::size_t j = 0; j < nb; ++j) out[i * (na + nb) + na + j] = b.values()[i * nb + j];
  }
  bool track = wants_record(tape, {&a, &b});
  Tensor c = result({m, na + nb}, std::move(out), track);
  if (track) {
    tape->record(
        [a, b, c, m, na, nb](Tape& t) {
          const std::vector<double>* oc = t.find_adjoint(c);
          if (!oc) return;
          if (a.requires_grad()) {
            auto& ga = t.adjoint(a);
            for (std::size_t i = 0; i < m; ++i) {
              for (std::size_t j = 0; j < na; ++j) {
                ga[i * na + j] += (*oc)[i * (na + nb) + j];
              }
            }
          }
          if (b.requires_grad()) {
            auto& gb = t.adjoint(b);
            for (std::size_t i = 0; i < m; ++i) {
              for (std::size_t j = 0; j < nb; ++j) {
                gb[i * nb + j] += (*oc)[i * (na + nb) + na + j];
              }
            }
          }
        },
        c);
  }
  return c;
}

Tensor tile_rows(Tape* tape, const Tensor& row, std::size_t copies) {
  const std::size_t rank = row.shape().size();
  if (copies == 0 || rank > 2 || (rank == 2 && row.shape()[0] != 1)) {
    throw std::invalid_argument("tile_rows: expects a single row, got shape " +
                                shape_str(row.shape()));
  }
  const std::size_t n = (rank == 2) ? row.shape()[1] : row.shape()[0];
  std::vector<double> out(copies * n);
  for (std::size_t i = 0; i < copies; ++i) {
    std::copy(row.values().begin(), row.values().end(), out.begin() + i * n);
  }
  bool track = wants_record(tape, {&row});
  Tensor c = result({copies, n}, std::move(out), track);
  if (track) {
    tape->record(
        [row, c, copies, n](Tape& t) {
          const std::vector<double>* oc = t.find_adjoint(c);
          if (!oc || !row.requires_grad()) return;
          auto& gr = t.adjoint(row);
          for (std::size_t i = 0; i < copies; ++i) {
            for (std::size_t j = 0; j < n; ++j) gr[j] += (*oc)[i * n + j];
          }
        },
        c);
  }
  return c;
}

Tensor detach(const Tensor& a) {
  return Tensor::from(a.shape(), a.values(), false);
}

}  // namespace ops

void sgd_step(std::span<Tensor> params, double lr) {
  for (Tensor& p : params) {
    if (!p.requires_grad() || !p.grad_allocated()) {
      throw std::logic_error("sgd_step: parameter has no gradient");
    }
  }
  for (Tensor& p : params) {
    auto& v = p.values();
    auto& g = p.grad();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr * g[i];
    p.zero_grad();
  }
}

void zero_grads(std::span<Tensor> params) {
  for (Tensor& p : params) p.zero_grad();
}

}  // namespace fedadg
