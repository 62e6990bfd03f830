#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fedadg/params.hpp"
#include "fedadg/rng.hpp"
#include "fedadg/tensor.hpp"

namespace fedadg {

// Fully connected layer. Weights are [in x out], bias is a single row that
// gets tiled across the batch. Init is uniform +-1/sqrt(fan_in) for both,
// drawn weight-then-bias so layouts and RNG streams stay in lockstep.
struct Linear {
  Tensor W;
  Tensor b;

  static Linear init(Rng& rng, std::size_t in, std::size_t out);
  Tensor forward(Tape* tape, const Tensor& x) const;
};

// h = F(x): input -> hidden (relu) -> feature_dim.
class FeatureExtractor {
 public:
  FeatureExtractor() = default;
  FeatureExtractor(Rng& rng, std::size_t input_dim, std::size_t hidden_dim,
                   std::size_t feature_dim);

  Tensor extract(Tape* tape, const Tensor& x) const;

  std::size_t input_dim() const { return input_dim_; }
  std::size_t feature_dim() const { return feature_dim_; }
  std::vector<Tensor> params();
  ParameterVector flatten() const;
  void unflatten(const ParameterVector& pv);

 private:
  std::size_t input_dim_ = 0, feature_dim_ = 0;
  Linear l1_, l2_;
};

// Predicted label distribution: a single linear layer over h, softmax on top.
class Classifier {
 public:
  Classifier() = default;
  Classifier(Rng& rng, std::size_t feature_dim, std::size_t num_classes);

  Tensor logits(Tape* tape, const Tensor& h) const;
  Tensor probabilities(Tape* tape, const Tensor& h) const;

  std::size_t num_classes() const { return num_classes_; }
  std::vector<Tensor> params();
  ParameterVector flatten() const;
  void unflatten(const ParameterVector& pv);

 private:
  std::size_t num_classes_ = 0;
  Linear out_;
};

// h' = G(z | y): concat(z, one_hot(y)) -> feature_dim (relu) -> feature_dim.
// With class conditioning disabled the label input is dropped entirely.
class DistributionGenerator {
 public:
  DistributionGenerator() = default;
  DistributionGenerator(Rng& rng, std::size_t noise_dim,
                        std::size_t num_classes, std::size_t feature_dim,
                        bool class_conditioned);

  Tensor generate(Tape* tape, const Tensor& z, const Tensor& y_onehot) const;

  std::size_t noise_dim() const { return noise_dim_; }
  bool class_conditioned() const { return class_conditioned_; }
  std::vector<Tensor> params();
  ParameterVector flatten() const;
  void unflatten(const ParameterVector& pv);

 private:
  std::size_t noise_dim_ = 0;
  bool class_conditioned_ = true;
  Linear l1_, l2_;
};

// D(h | y) in (0,1): frozen random projection, then
// concat(h . rp, one_hot(y)) -> hidden (relu) -> 1 -> logistic.
// rp never trains, never federates, and is shared bit-identically by every
// client of an experiment.
class Discriminator {
 public:
  Discriminator() = default;

  // rp entries i.i.d. N(0, 1/rp_dim) from `rp_rng` (the global-seed stream);
  // trained layers from `rng` (the client-local stream).
  static Discriminator gaussian_projection(Rng& rp_rng, Rng& rng,
                                           std::size_t feature_dim,
                                           std::size_t rp_dim,
                                           std::size_t num_classes,
                                           std::size_t hidden_dim,
                                           bool class_conditioned);
  // The w/o-RP ablation: identity projection, rp_dim == feature_dim.
  static Discriminator identity_projection(Rng& rng, std::size_t feature_dim,
                                           std::size_t num_classes,
                                           std::size_t hidden_dim,
                                           bool class_conditioned);

  Tensor discriminate(Tape* tape, const Tensor& features,
                      const Tensor& y_onehot) const;

  const Tensor& projection() const { return rp_; }
  std::size_t rp_dim() const { return rp_.cols(); }
  std::vector<Tensor> params();  // trained layers only — rp excluded
  ParameterVector flatten() const;
  void unflatten(const ParameterVector& pv);

 private:
  bool class_conditioned_ = true;
  Tensor rp_;
  Linear l1_, l2_;
};

// Row i is the indicator of labels[i]. Errors on out-of-range labels.
Tensor one_hot(const std::vector<int>& labels, std::size_t num_classes);

// z ~ U[0,1)^{batch x noise_dim} from the given stream.
Tensor sample_noise(Rng& rng, std::size_t batch, std::size_t noise_dim);

}  // namespace fedadg
