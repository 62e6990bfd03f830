#include "fedadg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fedadg {

namespace {
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
}

double argmax_accuracy(const Tensor& probs, const std::vector<int>& labels) {
  if (probs.shape().size() != 2 || probs.rows() != labels.size()) {
    throw std::invalid_argument("argmax_accuracy: probs " +
                                shape_str(probs.shape()) + " vs " +
                                std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw std::invalid_argument("argmax_accuracy: empty batch");
  const std::size_t m = probs.rows(), c = probs.cols();
  std::size_t hits = 0;
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < c; ++j) {
      if (probs.values()[i * c + j] > probs.values()[i * c + best]) best = j;
    }
    if (static_cast<int>(best) == labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(m);
}

double accuracy(const FeatureExtractor& f, const Classifier& c,
                const DomainDataset& ds, const std::vector<std::size_t>& idx) {
  auto [x, y] = gather(ds, idx);
  Tensor probs = c.probabilities(nullptr, f.extract(nullptr, x));
  return argmax_accuracy(probs, y);
}

namespace {

double sq_dist(const std::vector<double>& data, std::size_t i, std::size_t j,
               std::size_t d) {
  double acc = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    const double diff = data[i * d + k] - data[j * d + k];
    acc += diff * diff;
  }
  return acc;
}

double median_pairwise_distance(const std::vector<double>& pooled,
                                std::size_t n, std::size_t d) {
  std::vector<double> dists;
  dists.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      dists.push_back(std::sqrt(sq_dist(pooled, i, j, d)));
    }
  }
  if (dists.empty()) return 1.0;
  auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
  std::nth_element(dists.begin(), mid, dists.end());
  return *mid;
}

}  // namespace

double mmd_rbf(const Tensor& a, const Tensor& b, double bandwidth) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.cols() != b.cols()) {
    throw std::invalid_argument("mmd_rbf: dimension mismatch " +
                                shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  }
  const std::size_t m = a.rows(), n = b.rows(), d = a.cols();
  if (m == 0 || n == 0) throw std::invalid_argument("mmd_rbf: empty batch");

  std::vector<double> pooled;
  pooled.reserve((m + n) * d);
  pooled.insert(pooled.end(), a.values().begin(), a.values().end());
  pooled.insert(pooled.end(), b.values().begin(), b.values().end());

  double sigma = bandwidth;
  if (sigma <= 0.0) {
    sigma = median_pairwise_distance(pooled, m + n, d);
    if (sigma <= 0.0) sigma = 1.0;
  }
  const double denom = 2.0 * sigma * sigma;
  auto kernel = [&](std::size_t i, std::size_t j) {
    return std::exp(-sq_dist(pooled, i, j, d) / denom);
  };

  double kaa = 0.0, kbb = 0.0, kab = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) kaa += kernel(i, j);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) kbb += kernel(m + i, m + j);
  }
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) kab += kernel(i, m + j);
  }
  const double md = static_cast<double>(m), nd = static_cast<double>(n);
  return kaa / (md * md) + kbb / (nd * nd) - 2.0 * kab / (md * nd);
}

double AlignmentReport::mean_off_diagonal() const {
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < pairwise.size(); ++i) {
    for (std::size_t j = i + 1; j < pairwise[i].size(); ++j) {
      if (!std::isnan(pairwise[i][j])) {
        acc += pairwise[i][j];
        ++count;
      }
    }
  }
  return count ? acc / static_cast<double>(count) : kNan;
}

namespace {

// Rows of `features` whose label equals cls; undefined tensor when none.
Tensor select_class(const Tensor& features, const std::vector<int>& labels,
                    int cls) {
  const std::size_t d = features.cols();
  std::vector<double> rows;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == cls) {
      for (std::size_t k = 0; k < d; ++k) {
        rows.push_back(features.values()[i * d + k]);
      }
    }
  }
  if (rows.empty()) return Tensor();
  const std::size_t n = rows.size() / d;
  return Tensor::from({n, d}, std::move(rows), false);
}

}  // namespace

AlignmentReport alignment_report(const std::vector<ClientFeatureBatch>& clients,
                                 std::size_t num_classes, bool per_class) {
  if (clients.size() < 2) {
    throw std::invalid_argument("alignment_report: need at least 2 clients");
  }
  const std::size_t k = clients.size();
  AlignmentReport rep;
  rep.pairwise.assign(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      const double v = mmd_rbf(clients[i].features, clients[j].features);
      rep.pairwise[i][j] = rep.pairwise[j][i] = v;
    }
  }
  rep.reference.assign(k, kNan);
  for (std::size_t i = 0; i < k; ++i) {
    if (clients[i].generated.defined()) {
      rep.reference[i] = mmd_rbf(clients[i].features, clients[i].generated);
    }
  }
  if (per_class) {
    rep.per_class_pairwise.assign(
        num_classes, std::vector<std::vector<double>>(k, std::vector<double>(k, 0.0)));
    for (std::size_t cls = 0; cls < num_classes; ++cls) {
      std::vector<Tensor> per(k);
      for (std::size_t i = 0; i < k; ++i) {
        per[i] = select_class(clients[i].features, clients[i].labels,
                              static_cast<int>(cls));
      }
      for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) {
          const double v = (per[i].defined() && per[j].defined())
                               ? mmd_rbf(per[i], per[j])
                               : kNan;
          rep.per_class_pairwise[cls][i][j] = v;
          rep.per_class_pairwise[cls][j][i] = v;
        }
      }
    }
  }
  return rep;
}

}  // namespace fedadg
