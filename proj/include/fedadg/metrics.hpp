#pragma once

#include <cstddef>
#include <vector>

#include "fedadg/domains.hpp"
#include "fedadg/networks.hpp"
#include "fedadg/tensor.hpp"

namespace fedadg {

// Fraction of rows whose argmax matches the label; ties break toward the
// lowest class index. Read-only over model state.
double argmax_accuracy(const Tensor& probs, const std::vector<int>& labels);
double accuracy(const FeatureExtractor& f, const Classifier& c,
                const DomainDataset& ds, const std::vector<std::size_t>& idx);

// Biased V-statistic estimate of squared MMD with an RBF kernel
// k(x,y) = exp(-|x-y|^2 / (2 sigma^2)). bandwidth <= 0 selects the median
// pairwise distance over the pooled samples (falling back to 1.0 when the
// median is zero). Nonnegative up to ~1e-9 rounding.
double mmd_rbf(const Tensor& a, const Tensor& b, double bandwidth = 0.0);

// Cross-client alignment diagnostic. `pairwise[i][j]` is the MMD between
// clients i and j's feature batches; `reference[k]` the MMD between client
// k's features and its generated batch (NaN when absent). Per-class mode
// conditions both sides on each label; cells where a client lacks the class
// are NaN ("missing, not zero").
struct AlignmentReport {
  std::vector<std::vector<double>> pairwise;
  std::vector<double> reference;
  std::vector<std::vector<std::vector<double>>> per_class_pairwise;

  double mean_off_diagonal() const;
};

struct ClientFeatureBatch {
  Tensor features;            // [n x feature_dim]
  std::vector<int> labels;    // size n
  Tensor generated;           // [n x feature_dim] or undefined
};

AlignmentReport alignment_report(const std::vector<ClientFeatureBatch>& clients,
                                 std::size_t num_classes, bool per_class);

// One evaluation row. NaN marks a cell that does not apply (round-0 losses,
// adversarial terms in plain-FedAvg mode); the CSV writer leaves those empty.
struct RoundMetrics {
  std::size_t round = 0;
  struct ClientLosses {
    double l_err, l_adv_f, l_adv_d, l_adv_g;
  };
  std::vector<ClientLosses> client_losses;
  std::vector<double> source_acc;
  double target_acc = 0.0;
  std::vector<double> pairwise_mmd;  // upper triangle, (i,j) with i<j
  std::vector<double> ref_mmd;       // per client; empty when no generator
};

}  // namespace fedadg
