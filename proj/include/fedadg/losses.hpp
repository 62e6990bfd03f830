#pragma once

#include <vector>

#include "fedadg/tensor.hpp"

namespace fedadg {

struct LossWeights {
  double lambda0 = 0.85;  // weight on L_adv_f
  double lambda1 = 0.15;  // weight on L_err
};

// Least-squares adversarial terms. Scores are discriminator outputs in (0,1);
// extracted features are the negative samples, generated ones the positive.
//
// loss_adv_d = -( mean((1 - d_real)^2) + mean(d_fake^2) )   — trains D
// loss_adv_f =    mean((1 - d_real)^2)                       — trains F via D
// loss_adv_g =    mean((1 - d_fake)^2)                       — trains G via D
Tensor loss_adv_d(Tape* tape, const Tensor& d_real, const Tensor& d_fake);
Tensor loss_adv_f(Tape* tape, const Tensor& d_real);
Tensor loss_adv_g(Tape* tape, const Tensor& d_fake);

// Label-smoothed cross-entropy: targets q = (1-eps)*one_hot + eps/C, loss is
// the batch mean of -sum_c q_c log(max(p_c, 1e-12)). The clamp keeps early
// confident-wrong predictions from producing -inf.
Tensor loss_err(Tape* tape, const Tensor& probs, const std::vector<int>& labels,
                double epsilon);

// The composite reporting loss: L_adv_d + L_adv_g + l0*L_adv_f + l1*L_err.
// Training follows the per-component schedule, never this joint sum.
Tensor total_loss(Tape* tape, const Tensor& adv_d, const Tensor& adv_g,
                  const Tensor& adv_f, const Tensor& err,
                  const LossWeights& weights);

}  // namespace fedadg
