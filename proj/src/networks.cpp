#include "fedadg/networks.hpp"

#include <cmath>
#include <stdexcept>

namespace fedadg {

namespace {

void restore_pair(const ParameterVector& pv, const std::string& prefix,
                  Linear& l) {
  pv.restore_into(prefix + ".W", l.W);
  pv.restore_into(prefix + ".b", l.b);
}

}  // namespace

Linear Linear::init(Rng& rng, std::size_t in, std::size_t out) {
  Linear l;
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  l.W = Tensor::zeros({in, out}, true);
  rng.fill_uniform(l.W.values(), -bound, bound);
  l.b = Tensor::zeros({1, out}, true);
  rng.fill_uniform(l.b.values(), -bound, bound);
  return l;
}

Tensor Linear::forward(Tape* tape, const Tensor& x) const {
  Tensor xw = ops::matmul(tape, x, W);
  return ops::add(tape, xw, ops::tile_rows(tape, b, x.rows()));
}

// ---------------------------------------------------------------------------

FeatureExtractor::FeatureExtractor(Rng& rng, std::size_t input_dim,
                                   std::size_t hidden_dim,
                                   std::size_t feature_dim)
    : input_dim_(input_dim), feature_dim_(feature_dim) {
  l1_ = Linear::init(rng, input_dim, hidden_dim);
  l2_ = Linear::init(rng, hidden_dim, feature_dim);
}

Tensor FeatureExtractor::extract(Tape* tape, const Tensor& x) const {
  if (x.shape().size() != 2 || x.cols() != input_dim_) {
    throw std::invalid_argument("extract: input shape " + shape_str(x.shape()) +
                                " does not match input_dim " +
                                std::to_string(input_dim_));
  }
  return l2_.forward(tape, ops::relu(tape, l1_.forward(tape, x)));
}

std::vector<Tensor> FeatureExtractor::params() {
  return {l1_.W, l1_.b, l2_.W, l2_.b};
}

ParameterVector FeatureExtractor::flatten() const {
  ParameterVector pv;
  pv.add("w_f.l1.W", l1_.W);
  pv.add("w_f.l1.b", l1_.b);
  pv.add("w_f.l2.W", l2_.W);
  pv.add("w_f.l2.b", l2_.b);
  return pv;
}

void FeatureExtractor::unflatten(const ParameterVector& pv) {
  restore_pair(pv, "w_f.l1", l1_);
  restore_pair(pv, "w_f.l2", l2_);
}

// ---------------------------------------------------------------------------

Classifier::Classifier(Rng& rng, std::size_t feature_dim,
                       std::size_t num_classes)
    : num_classes_(num_classes) {
  out_ = Linear::init(rng, feature_dim, num_classes);
}

Tensor Classifier::logits(Tape* tape, const Tensor& h) const {
  return out_.forward(tape, h);
}

Tensor Classifier::probabilities(Tape* tape, const Tensor& h) const {
  return ops::softmax(tape, logits(tape, h));
}

std::vector<Tensor> Classifier::params() { return {out_.W, out_.b}; }

ParameterVector Classifier::flatten() const {
  ParameterVector pv;
  pv.add("w_c.out.W", out_.W);
  pv.add("w_c.out.b", out_.b);
  return pv;
}

void Classifier::unflatten(const ParameterVector& pv) {
  restore_pair(pv, "w_c.out", out_);
}

// ---------------------------------------------------------------------------

DistributionGenerator::DistributionGenerator(Rng& rng, std::size_t noise_dim,
                                             std::size_t num_classes,
                                             std::size_t feature_dim,
                                             bool class_conditioned)
    : noise_dim_(noise_dim), class_conditioned_(class_conditioned) {
  const std::size_t in = noise_dim + (class_conditioned ? num_classes : 0);
  l1_ = Linear::init(rng, in, feature_dim);
  l2_ = Linear::init(rng, feature_dim, feature_dim);
}

Tensor DistributionGenerator::generate(Tape* tape, const Tensor& z,
                                       const Tensor& y_onehot) const {
  Tensor in = class_conditioned_ ? ops::concat_cols(tape, z, y_onehot) : z;
  return l2_.forward(tape, ops::relu(tape, l1_.forward(tape, in)));
}

std::vector<Tensor> DistributionGenerator::params() {
  return {l1_.W, l1_.b, l2_.W, l2_.b};
}

ParameterVector DistributionGenerator::flatten() const {
  ParameterVector pv;
  pv.add("w_g.l1.W", l1_.W);
  pv.add("w_g.l1.b", l1_.b);
  pv.add("w_g.l2.W", l2_.W);
  pv.add("w_g.l2.b", l2_.b);
  return pv;
}

void DistributionGenerator::unflatten(const ParameterVector& pv) {
  restore_pair(pv, "w_g.l1", l1_);
  restore_pair(pv, "w_g.l2", l2_);
}

// ---------------------------------------------------------------------------

Discriminator Discriminator::gaussian_projection(
    Rng& rp_rng, Rng& rng, std::size_t feature_dim, std::size_t rp_dim,
    std::size_t num_classes, std::size_t hidden_dim, bool class_conditioned) {
  Discriminator d;
  d.class_conditioned_ = class_conditioned;
  d.rp_ = Tensor::zeros({feature_dim, rp_dim}, false);
  const double std = 1.0 / std::sqrt(static_cast<double>(rp_dim));
  rp_rng.fill_normal(d.rp_.values(), 0.0, std);
  const std::size_t in = rp_dim + (class_conditioned ? num_classes : 0);
  d.l1_ = Linear::init(rng, in, hidden_dim);
  d.l2_ = Linear::init(rng, hidden_dim, 1);
  return d;
}

Discriminator Discriminator::identity_projection(Rng& rng,
                                                 std::size_t feature_dim,
                                                 std::size_t num_classes,
                                                 std::size_t hidden_dim,
                                                 bool class_conditioned) {
  Discriminator d;
  d.class_conditioned_ = class_conditioned;
  d.rp_ = Tensor::zeros({feature_dim, feature_dim}, false);
  for (std::size_t i = 0; i < feature_dim; ++i) {
    d.rp_.values()[i * feature_dim + i] = 1.0;
  }
  const std::size_t in = feature_dim + (class_conditioned ? num_classes : 0);
  d.l1_ = Linear::init(rng, in, hidden_dim);
  d.l2_ = Linear::init(rng, hidden_dim, 1);
  return d;
}

Tensor Discriminator::discriminate(Tape* tape, const Tensor& features,
                                   const Tensor& y_onehot) const {
  if (features.shape().size() != 2 || features.cols() != rp_.rows()) {
    throw std::invalid_argument("discriminate: feature shape " +
                                shape_str(features.shape()) +
                                " does not match projection " +
                                shape_str(rp_.shape()));
  }
  Tensor projected = ops::matmul(tape, features, rp_);
  Tensor in = class_conditioned_ ? ops::concat_cols(tape, projected, y_onehot)
                                 : projected;
  Tensor score = l2_.forward(tape, ops::relu(tape, l1_.forward(tape, in)));
  return ops::logistic(tape, score);
}

std::vector<Tensor> Discriminator::params() {
  return {l1_.W, l1_.b, l2_.W, l2_.b};
}

ParameterVector Discriminator::flatten() const {
  ParameterVector pv;
  pv.add("w_d.l1.W", l1_.W);
  pv.add("w_d.l1.b", l1_.b);
  pv.add("w_d.l2.W", l2_.W);
  pv.add("w_d.l2.b", l2_.b);
  return pv;
}

void Discriminator::unflatten(const ParameterVector& pv) {
  restore_pair(pv, "w_d.l1", l1_);
  restore_pair(pv, "w_d.l2", l2_);
}

// ---------------------------------------------------------------------------

Tensor one_hot(const std::vector<int>& labels, std::size_t num_classes) {
  Tensor t = Tensor::zeros({labels.size(), num_classes}, false);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
      throw std::out_of_range("label " + std::to_string(labels[i]) +
                              " outside [0, " + std::to_string(num_classes) +
                              ")");
    }
    t.values()[i * num_classes + static_cast<std::size_t>(labels[i])] = 1.0;
  }
  return t;
}

Tensor sample_noise(Rng& rng, std::size_t batch, std::size_t noise_dim) {
  Tensor z = Tensor::zeros({batch, noise_dim}, false);
  rng.fill_uniform(z.values(), 0.0, 1.0);
  return z;
}

}  // namespace fedadg
