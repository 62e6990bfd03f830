#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "fd_check.hpp"
#include "fedadg/rng.hpp"
#include "fedadg/tensor.hpp"

using namespace fedadg;
using fedadg::testing::max_grad_error;

namespace {

Tensor random_tensor(Rng& rng, Shape shape, bool requires_grad,
                     double lo = -1.0, double hi = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape), requires_grad);
  rng.fill_uniform(t.values(), lo, hi);
  return t;
}

// Keeps relu/clamp inputs away from their kinks so finite differences see a
// smooth function.
void nudge_from(Tensor& t, double point, double margin) {
  for (double& v : t.values()) {
    if (std::abs(v - point) < margin) v = point + margin;
  }
}

}  // namespace

TEST_CASE("tensor construction and validation") {
  Tensor t = Tensor::from({2, 2}, {1, 2, 3, 4});
  CHECK(t.size() == 4);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 2);
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1, 2, 3}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor::from({2}, {1.0, std::nan("")}), std::runtime_error);
  CHECK_THROWS_AS(Tensor::zeros({0, 3}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor::scalar(1.0).rows(), std::logic_error);
  CHECK(Tensor::scalar(4.25).item() == 4.25);
  CHECK_THROWS_AS(Tensor::from({3}, {1, 2, 3}).item(), std::logic_error);
  // grad access requires requires_grad
  Tensor w = Tensor::from({2}, {1, 2}, true);
  CHECK(w.grad().size() == 2);
  CHECK_THROWS_AS(t.grad(), std::logic_error);
}

TEST_CASE("matmul values") {
  Tensor i2 = Tensor::from({2, 2}, {1, 0, 0, 1});
  Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
  Tensor c = ops::matmul(nullptr, i2, a);
  CHECK(c.values() == std::vector<double>{1, 2, 3, 4});

  Tensor row = Tensor::from({1, 2}, {1, 0});
  Tensor col = Tensor::from({2, 1}, {0, 5});
  CHECK(ops::matmul(nullptr, row, col).values() == std::vector<double>{0});

  // Mismatch error names both shapes.
  Tensor bad = Tensor::from({3, 2}, {1, 2, 3, 4, 5, 6});
  try {
    ops::matmul(nullptr, a, bad);
    FAIL("expected shape error");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x2]") != std::string::npos);
    CHECK(msg.find("[3x2]") != std::string::npos);
  }
}

TEST_CASE("elementwise values") {
  Tensor r = ops::relu(nullptr, Tensor::from({3}, {-1, 0, 2}));
  CHECK(r.values() == std::vector<double>{0, 0, 2});

  Tensor s = ops::softmax(nullptr, Tensor::from({2}, {0, 0}));
  CHECK(s.values()[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s.values()[1] == doctest::Approx(0.5).epsilon(1e-15));

  Tensor ms = ops::mean(nullptr, ops::square(nullptr, Tensor::from({2}, {1, -3})));
  CHECK(ms.item() == 5.0);

  CHECK_THROWS_AS(ops::add(nullptr, Tensor::from({2}, {1, 2}),
                           Tensor::from({3}, {1, 2, 3})),
                  std::invalid_argument);
  CHECK_THROWS_AS(ops::log(nullptr, Tensor::from({2}, {1.0, 0.0})),
                  std::domain_error);
  CHECK_THROWS_AS(ops::log(nullptr, Tensor::from({1}, {-2.0})),
                  std::domain_error);
}

TEST_CASE("softmax rows sum to one and shift invariance") {
  Rng rng(11);
  Tensor x = random_tensor(rng, {5, 7}, false, -8.0, 8.0);
  Tensor s = ops::softmax(nullptr, x);
  for (std::size_t i = 0; i < 5; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < 7; ++j) acc += s.values()[i * 7 + j];
    CHECK(std::abs(acc - 1.0) < 1e-12);
  }
  Tensor x2 = Tensor::from(x.shape(), x.values());
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 7; ++j) x2.values()[i * 7 + j] += 123.456;
  }
  Tensor s2 = ops::softmax(nullptr, x2);
  for (std::size_t k = 0; k < s.size(); ++k) {
    CHECK(s.values()[k] == doctest::Approx(s2.values()[k]).epsilon(1e-12));
  }
}

TEST_CASE("backward trivial cases") {
  // loss = sum(w) -> grad all ones
  Tensor w = Tensor::from({2, 3}, {1, -2, 3, 4, -5, 6}, true);
  Tape tape;
  tape.backward(ops::sum(&tape, w));
  for (double g : w.grad()) CHECK(g == 1.0);

  // loss = mean(square(w)), w = [3] -> grad 6
  Tensor v = Tensor::from({1}, {3.0}, true);
  Tape tape2;
  tape2.backward(ops::mean(&tape2, ops::square(&tape2, v)));
  CHECK(v.grad()[0] == 6.0);
}

TEST_CASE("backward error surfaces") {
  Tensor w = Tensor::from({2}, {1, 2}, true);
  Tape tape;
  Tensor y = ops::square(&tape, w);
  CHECK_THROWS_AS(tape.backward(y), std::invalid_argument);  // non-scalar

  Tensor s = Tensor::scalar(1.0, true);
  Tape other;
  CHECK_THROWS_AS(other.backward(s), std::invalid_argument);  // not on tape
}

TEST_CASE("repeated backward accumulates leaf grads") {
  Tensor w = Tensor::from({2}, {2.0, -1.0}, true);
  Tape tape;
  Tensor loss = ops::sum(&tape, ops::square(&tape, w));
  tape.backward(loss);
  CHECK(w.grad()[0] == 4.0);
  tape.backward(loss);
  CHECK(w.grad()[0] == 8.0);  // documented accumulation semantics
  w.zero_grad();
  CHECK(w.grad()[0] == 0.0);
}

TEST_CASE("sgd_step") {
  Tensor p = Tensor::from({1}, {1.0}, true);
  p.grad()[0] = 2.0;
  std::vector<Tensor> params{p};
  sgd_step(params, 0.1);
  CHECK(p.values()[0] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(p.grad()[0] == 0.0);  // zeroed after the step

  p.grad()[0] = 5.0;
  sgd_step(params, 0.0);  // lr 0 -> unchanged
  CHECK(p.values()[0] == doctest::Approx(0.8).epsilon(1e-15));

  sgd_step(params, 0.1);  // grad 0 -> unchanged
  CHECK(p.values()[0] == doctest::Approx(0.8).epsilon(1e-15));

  Tensor fresh = Tensor::from({1}, {1.0}, true);
  std::vector<Tensor> missing{fresh};
  CHECK_THROWS_AS(sgd_step(missing, 0.1), std::logic_error);
}

TEST_CASE("finite differences: every primitive") {
  Rng rng(101);

  SUBCASE("matmul 3x4 by 4x2") {
    Tensor a = random_tensor(rng, {3, 4}, true);
    Tensor b = random_tensor(rng, {4, 2}, true);
    auto fn = [&](Tape* t) {
      return ops::mean(t, ops::square(t, ops::matmul(t, a, b)));
    };
    CHECK(max_grad_error(fn, {a, b}) < 1e-4);
  }
  SUBCASE("add sub mul") {
    Tensor a = random_tensor(rng, {3, 3}, true);
    Tensor b = random_tensor(rng, {3, 3}, true);
    auto fn = [&](Tape* t) {
      Tensor u = ops::add(t, a, b);
      Tensor v = ops::sub(t, a, b);
      return ops::mean(t, ops::square(t, ops::mul(t, u, v)));
    };
    CHECK(max_grad_error(fn, {a, b}) < 1e-4);
  }
  SUBCASE("relu away from kink") {
    Tensor a = random_tensor(rng, {4, 4}, true);
    nudge_from(a, 0.0, 1e-3);
    auto fn = [&](Tape* t) { return ops::mean(t, ops::relu(t, a)); };
    CHECK(max_grad_error(fn, {a}) < 1e-4);
  }
  SUBCASE("softmax with log and sum") {
    Tensor a = random_tensor(rng, {3, 5}, true, -2.0, 2.0);
    auto fn = [&](Tape* t) {
      return ops::sum(t, ops::log(t, ops::softmax(t, a)));
    };
    CHECK(max_grad_error(fn, {a}) < 1e-4);
  }
  SUBCASE("logistic") {
    Tensor a = random_tensor(rng, {2, 6}, true, -3.0, 3.0);
    auto fn = [&](Tape* t) {
      return ops::mean(t, ops::square(t, ops::logistic(t, a)));
    };
    CHECK(max_grad_error(fn, {a}) < 1e-4);
  }
  SUBCASE("clamp_min away from floor") {
    Tensor a = random_tensor(rng, {3, 3}, true);
    nudge_from(a, 0.25, 1e-3);
    auto fn = [&](Tape* t) {
      return ops::mean(t, ops::clamp_min(t, a, 0.25));
    };
    CHECK(max_grad_error(fn, {a}) < 1e-4);
  }
  SUBCASE("scale and concat and tile") {
    Tensor a = random_tensor(rng, {3, 2}, true);
    Tensor b = random_tensor(rng, {3, 4}, true);
    Tensor row = random_tensor(rng, {1, 6}, true);
    auto fn = [&](Tape* t) {
      Tensor joined = ops::concat_cols(t, a, b);
      Tensor tiled = ops::tile_rows(t, row, 3);
      return ops::mean(t, ops::square(t, ops::add(t, joined, tiled)));
    };
    CHECK(max_grad_error(fn, {a, b, row}) < 1e-4);
  }
  SUBCASE("mean vs sum") {
    Tensor a = random_tensor(rng, {5}, true);
    auto fn = [&](Tape* t) {
      return ops::add(t, ops::mean(t, ops::square(t, a)),
                      ops::scale(t, ops::sum(t, a), 0.125));
    };
    CHECK(max_grad_error(fn, {a}) < 1e-4);
  }
}

TEST_CASE("finite differences: two-layer perceptron") {
  Rng rng(202);
  Tensor x = random_tensor(rng, {6, 3}, false);
  Tensor w1 = random_tensor(rng, {3, 8}, true);
  Tensor b1 = random_tensor(rng, {1, 8}, true);
  Tensor w2 = random_tensor(rng, {8, 2}, true);
  Tensor b2 = random_tensor(rng, {1, 2}, true);
  auto fn = [&](Tape* t) {
    Tensor h = ops::relu(
        t, ops::add(t, ops::matmul(t, x, w1), ops::tile_rows(t, b1, 6)));
    Tensor out = ops::add(t, ops::matmul(t, h, w2), ops::tile_rows(t, b2, 6));
    return ops::mean(t, ops::square(t, out));
  };
  CHECK(max_grad_error(fn, {w1, b1, w2, b2}) < 1e-4);
}

TEST_CASE("finite differences: diamond-shaped graph sums both paths") {
  Rng rng(303);
  Tensor w = random_tensor(rng, {4}, true, 0.5, 1.5);
  auto fn = [&](Tape* t) {
    Tensor s = ops::square(t, w);           // shared subexpression
    Tensor left = ops::mean(t, s);          // path 1
    Tensor right = ops::mean(t, ops::mul(t, s, w));  // path 2
    return ops::add(t, left, right);
  };
  CHECK(max_grad_error(fn, {w}) < 1e-4);

  // And the hand value: d/dw [w^2/4 + w^3/4] = w/2 + 3w^2/4 per element.
  std::vector<Tensor> leaves{w};
  zero_grads(leaves);
  Tape tape;
  tape.backward(fn(&tape));
  for (std::size_t i = 0; i < 4; ++i) {
    const double v = w.values()[i];
    CHECK(w.grad()[i] ==
          doctest::Approx(v / 2.0 + 0.75 * v * v).epsilon(1e-12));
  }
}

TEST_CASE("detach cuts the graph") {
  Tensor w = Tensor::from({2}, {3.0, 4.0}, true);
  Tape tape;
  Tensor h = ops::square(&tape, w);
  Tensor frozen = ops::detach(h);
  CHECK_FALSE(frozen.requires_grad());
  Tensor loss = ops::mean(&tape, ops::mul(&tape, h, frozen));
  tape.backward(loss);
  // d/dw mean(w^2 * c) with c = w^2 held constant = 2*w*c/2 = w^3
  CHECK(w.grad()[0] == doctest::Approx(27.0).epsilon(1e-12));
  CHECK(w.grad()[1] == doctest::Approx(64.0).epsilon(1e-12));
}

TEST_CASE("no-tape evaluation records nothing and requires no grad") {
  Tensor w = Tensor::from({2}, {1.0, 2.0}, true);
  Tensor out = ops::square(nullptr, w);
  CHECK_FALSE(out.requires_grad());
  Tape tape;
  Tensor tracked = ops::square(&tape, w);
  CHECK(tracked.requires_grad());
  CHECK(tape.num_entries() == 1);
}
