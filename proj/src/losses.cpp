#include "fedadg/losses.hpp"

#include <stdexcept>

namespace fedadg {

namespace {

constexpr double kProbFloor = 1e-12;

void check_scores(const char* op, const Tensor& scores) {
  if (!scores.defined() || scores.size() == 0) {
    throw std::invalid_argument(std::string(op) + ": empty score batch");
  }
}

// mean((1 - s)^2) on the tape.
Tensor mean_sq_gap(Tape* tape, const Tensor& scores) {
  Tensor ones = Tensor::full(scores.shape(), 1.0, false);
  return ops::mean(tape, ops::square(tape, ops::sub(tape, ones, scores)));
}

}  // namespace

Tensor loss_adv_d(Tape* tape, const Tensor& d_real, const Tensor& d_fake) {
  check_scores("loss_adv_d", d_real);
  check_scores("loss_adv_d", d_fake);
  Tensor real_term = mean_sq_gap(tape, d_real);
  Tensor fake_term = ops::mean(tape, ops::square(tape, d_fake));
  return ops::scale(tape, ops::add(tape, real_term, fake_term), -1.0);
}

Tensor loss_adv_f(Tape* tape, const Tensor& d_real) {
  check_scores("loss_adv_f", d_real);
  return mean_sq_gap(tape, d_real);
}

Tensor loss_adv_g(Tape* tape, const Tensor& d_fake) {
  check_scores("loss_adv_g", d_fake);
  return mean_sq_gap(tape, d_fake);
}

Tensor loss_err(Tape* tape, const Tensor& probs, const std::vector<int>& labels,
                double epsilon) {
  if (probs.shape().size() != 2) {
    throw std::invalid_argument("loss_err: probs must be [batch x classes]");
  }
  const std::size_t m = probs.rows(), c = probs.cols();
  if (labels.size() != m) {
    throw std::invalid_argument("loss_err: " + std::to_string(labels.size()) +
                                " labels for batch of " + std::to_string(m));
  }
  if (m == 0) throw std::invalid_argument("loss_err: empty batch");
  if (epsilon < 0.0 || epsilon >= 1.0) {
    throw std::invalid_argument("loss_err: epsilon must be in [0, 1)");
  }

  // Smoothed targets are constants, not differentiated through.
  Tensor q = Tensor::full({m, c}, epsilon / static_cast<double>(c), false);
  for (std::size_t i = 0; i < m; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c) {
      throw std::out_of_range("loss_err: label " + std::to_string(labels[i]) +
                              " outside [0, " + std::to_string(c) + ")");
    }
    q.values()[i * c + static_cast<std::size_t>(labels[i])] += 1.0 - epsilon;
  }

  Tensor log_p = ops::log(tape, ops::clamp_min(tape, probs, kProbFloor));
  Tensor weighted = ops::mul(tape, q, log_p);
  return ops::scale(tape, ops::sum(tape, weighted),
                    -1.0 / static_cast<double>(m));
}

Tensor total_loss(Tape* tape, const Tensor& adv_d, const Tensor& adv_g,
                  const Tensor& adv_f, const Tensor& err,
                  const LossWeights& weights) {
  Tensor acc = ops::add(tape, adv_d, adv_g);
  acc = ops::add(tape, acc, ops::scale(tape, adv_f, weights.lambda0));
  return ops::add(tape, acc, ops::scale(tape, err, weights.lambda1));
}

}  // namespace fedadg
