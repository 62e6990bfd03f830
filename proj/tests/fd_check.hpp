#pragma once

// Independent gradient oracle: central finite differences over every element
// of every parameter, compared against one tape backward pass.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "fedadg/tensor.hpp"

namespace fedadg::testing {

// `fn` rebuilds the computation from scratch on the given tape (or evaluates
// value-only when the tape is null) and returns the scalar loss.
inline double max_grad_error(const std::function<Tensor(Tape*)>& fn,
                             std::vector<Tensor> params, double eps = 1e-5) {
  zero_grads(params);
  {
    Tape tape;
    Tensor loss = fn(&tape);
    tape.backward(loss);
  }
  double worst = 0.0;
  for (Tensor& p : params) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double v = p.values()[i];
      p.values()[i] = v + eps;
      const double up = fn(nullptr).item();
      p.values()[i] = v - eps;
      const double dn = fn(nullptr).item();
      p.values()[i] = v;
      const double numeric = (up - dn) / (2.0 * eps);
      const double analytic = p.grad()[i];
      const double scale =
          std::max({1e-6, std::abs(numeric), std::abs(analytic)});
      worst = std::max(worst, std::abs(numeric - analytic) / scale);
    }
  }
  return worst;
}

}  // namespace fedadg::testing
