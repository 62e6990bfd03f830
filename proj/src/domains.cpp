#include "fedadg/domains.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "fedadg/util.hpp"

namespace fedadg {

std::string family_name(DomainFamily f) {
  switch (f) {
    case DomainFamily::rotated_two_moons: return "rotated_two_moons";
    case DomainFamily::shifted_gaussian_mixture: return "shifted_gaussian_mixture";
  }
  throw std::logic_error("unknown domain family");
}

DomainFamily family_from_name(const std::string& name) {
  if (name == "rotated_two_moons") return DomainFamily::rotated_two_moons;
  if (name == "shifted_gaussian_mixture") {
    return DomainFamily::shifted_gaussian_mixture;
  }
  throw std::invalid_argument("unknown domain family: " + name);
}

namespace {

// Normalized before the radian conversion so that 0 and 360 rotate by the
// bit-identical amount (fmod(360,360) is exactly 0).
double wrap_degrees(double angle) {
  double a = std::fmod(angle, 360.0);
  if (a < 0.0) a += 360.0;
  return a;
}

void rotate_plane(double& x, double& y, double cos_t, double sin_t) {
  const double rx = x * cos_t - y * sin_t;
  const double ry = x * sin_t + y * cos_t;
  x = rx;
  y = ry;
}

void make_moons(const DomainSpec& spec, Rng& rng, DomainDataset& ds) {
  const std::size_t n_outer = spec.samples / 2;
  const std::size_t n_inner = spec.samples - n_outer;
  const double rad = wrap_degrees(spec.angle_deg) * std::numbers::pi / 180.0;
  const double c = std::cos(rad), s = std::sin(rad);

  auto emit = [&](double x, double y, int label) {
    x += rng.normal() * spec.noise;
    y += rng.normal() * spec.noise;
    rotate_plane(x, y, c, s);
    ds.xs.push_back(x);
    ds.xs.push_back(y);
    ds.ys.push_back(label);
  };

  for (std::size_t i = 0; i < n_outer; ++i) {
    const double t = n_outer > 1 ? std::numbers::pi * static_cast<double>(i) /
                                       static_cast<double>(n_outer - 1)
                                 : 0.0;
    emit(std::cos(t), std::sin(t), 0);
  }
  for (std::size_t i = 0; i < n_inner; ++i) {
    const double t = n_inner > 1 ? std::numbers::pi * static_cast<double>(i) /
                                       static_cast<double>(n_inner - 1)
                                 : 0.0;
    emit(1.0 - std::cos(t), 1.0 - std::sin(t) - 0.5, 1);
  }
}

void make_mixture(const DomainSpec& spec, Rng& rng, DomainDataset& ds) {
  const double rad = wrap_degrees(spec.angle_deg) * std::numbers::pi / 180.0;
  const double c = std::cos(rad), s = std::sin(rad);
  const double radius = 2.0;

  for (std::size_t cls = 0; cls < spec.num_classes; ++cls) {
    // Deterministic near-even allocation; identical across domains, so label
    // marginals match everywhere.
    const std::size_t count = spec.samples / spec.num_classes +
                              (cls < spec.samples % spec.num_classes ? 1 : 0);
    const double phase = 2.0 * std::numbers::pi * static_cast<double>(cls) /
                         static_cast<double>(spec.num_classes);
    double mx = radius * std::cos(phase);
    double my = radius * std::sin(phase);
    rotate_plane(mx, my, c, s);  // the domain shift: class layout rotates
    for (std::size_t i = 0; i < count; ++i) {
      for (std::size_t d = 0; d < spec.input_dim; ++d) {
        double base = d == 0 ? mx : (d == 1 ? my : 0.0);
        ds.xs.push_back(base + rng.normal() * spec.noise);
      }
      ds.ys.push_back(static_cast<int>(cls));
    }
  }
}

// Stratified 70/30 with every class guaranteed in both splits.
void split_dataset(Rng& rng, DomainDataset& ds) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds.ys[i]].push_back(i);
  for (auto& [cls, idx] : by_class) {
    if (idx.size() < 2) {
      throw std::invalid_argument("class " + std::to_string(cls) +
                                  " has fewer than 2 samples, cannot split");
    }
    rng.shuffle(idx);
    std::size_t n_train = idx.size() * 7 / 10;
    n_train = std::clamp<std::size_t>(n_train, 1, idx.size() - 1);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      (i < n_train ? ds.train_idx : ds.test_idx).push_back(idx[i]);
    }
  }
  std::sort(ds.train_idx.begin(), ds.train_idx.end());
  std::sort(ds.test_idx.begin(), ds.test_idx.end());
}

}  // namespace

DomainDataset generate_domain(const DomainSpec& spec, int domain_id) {
  if (spec.samples == 0) {
    throw std::invalid_argument("domain spec has zero samples");
  }
  if (spec.num_classes < 2) {
    throw std::invalid_argument("need at least 2 classes");
  }
  if (spec.samples < 2 * spec.num_classes) {
    throw std::invalid_argument("need at least 2 samples per class, got " +
                                std::to_string(spec.samples) + " for " +
                                std::to_string(spec.num_classes) + " classes");
  }

  DomainDataset ds;
  ds.domain_id = domain_id;
  Rng rng(spec.seed);
  switch (spec.family) {
    case DomainFamily::rotated_two_moons:
      if (spec.input_dim != 2 || spec.num_classes != 2) {
        throw std::invalid_argument(
            "two-moons is a 2-d, 2-class family; got input_dim " +
            std::to_string(spec.input_dim) + ", num_classes " +
            std::to_string(spec.num_classes));
      }
      ds.input_dim = 2;
      ds.num_classes = 2;
      make_moons(spec, rng, ds);
      break;
    case DomainFamily::shifted_gaussian_mixture:
      if (spec.input_dim < 2 || spec.num_classes > 8) {
        throw std::invalid_argument("mixture family needs input_dim >= 2 and "
                                    "num_classes <= 8");
      }
      ds.input_dim = spec.input_dim;
      ds.num_classes = spec.num_classes;
      make_mixture(spec, rng, ds);
      break;
  }
  split_dataset(rng, ds);
  ensure_finite(ds.xs, "domain samples");
  return ds;
}

ExperimentSplit make_split(const SuiteSpec& suite, std::size_t target_index,
                           std::uint64_t seed) {
  if (suite.domain_angles.size() < 3) {
    throw std::invalid_argument("need at least 3 domains (2 sources + target)");
  }
  if (target_index >= suite.domain_angles.size()) {
    throw std::out_of_range("target index " + std::to_string(target_index) +
                            " out of range for " +
                            std::to_string(suite.domain_angles.size()) +
                            " domains");
  }
  ExperimentSplit split;
  for (std::size_t i = 0; i < suite.domain_angles.size(); ++i) {
    DomainSpec spec;
    spec.family = suite.family;
    spec.angle_deg = suite.domain_angles[i];
    spec.samples = suite.samples_per_domain;
    spec.noise = suite.noise;
    spec.input_dim = suite.input_dim;
    spec.num_classes = suite.num_classes;
    // Seed depends on the domain's position, not on which one is held out,
    // so all leave-one-out splits share the same underlying data.
    spec.seed = derive_seed(seed, "domain", i);
    DomainDataset ds = generate_domain(spec, static_cast<int>(i));
    if (i == target_index) {
      split.target = std::move(ds);
    } else {
      split.sources.push_back(std::move(ds));
    }
  }
  return split;
}

std::vector<std::vector<std::size_t>> epoch_batches(
    const std::vector<std::size_t>& indices, std::size_t batch_size, Rng& rng) {
  if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  std::vector<std::size_t> order = indices;
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

std::pair<Tensor, std::vector<int>> gather(const DomainDataset& ds,
                                           const std::vector<std::size_t>& idx) {
  if (idx.empty()) throw std::invalid_argument("gather: empty index list");
  Tensor x = Tensor::zeros({idx.size(), ds.input_dim}, false);
  std::vector<int> y(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= ds.size()) {
      throw std::out_of_range("gather: index " + std::to_string(idx[i]) +
                              " out of range");
    }
    for (std::size_t d = 0; d < ds.input_dim; ++d) {
      x.values()[i * ds.input_dim + d] = ds.xs[idx[i] * ds.input_dim + d];
    }
    y[i] = ds.ys[idx[i]];
  }
  return {std::move(x), std::move(y)};
}

void dump_datasets_csv(std::ostream& out,
                       const std::vector<const DomainDataset*>& datasets) {
  if (datasets.empty()) throw std::invalid_argument("no datasets to dump");
  const std::size_t dim = datasets.front()->input_dim;
  out << "domain_id,split,label";
  for (std::size_t d = 0; d < dim; ++d) out << ",x_" << d;
  out << "\n";
  char buf[64];
  for (const DomainDataset* ds : datasets) {
    if (ds->input_dim != dim) {
      throw std::invalid_argument("datasets in one dump must share input_dim");
    }
    std::vector<char> split_of(ds->size(), '?');
    for (std::size_t i : ds->train_idx) split_of[i] = 't';
    for (std::size_t i : ds->test_idx) split_of[i] = 'e';
    for (std::size_t i = 0; i < ds->size(); ++i) {
      out << ds->domain_id << ','
          << (split_of[i] == 't' ? "train" : "test") << ',' << ds->ys[i];
      for (std::size_t d = 0; d < dim; ++d) {
        std::snprintf(buf, sizeof(buf), "%.17g", ds->xs[i * dim + d]);
        out << ',' << buf;
      }
      out << "\n";
    }
  }
}

std::vector<DomainDataset> load_datasets_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty dataset CSV");
  std::size_t dim = 0;
  {
    std::stringstream header(line);
    std::string col;
    std::vector<std::string> cols;
    while (std::getline(header, col, ',')) cols.push_back(col);
    if (cols.size() < 4 || cols[0] != "domain_id" || cols[1] != "split" ||
        cols[2] != "label") {
      throw std::runtime_error("unexpected dataset CSV header: " + line);
    }
    dim = cols.size() - 3;
  }
  std::map<int, DomainDataset> by_id;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string field;
    std::getline(row, field, ',');
    const int id = std::stoi(field);
    std::getline(row, field, ',');
    const bool is_train = field == "train";
    if (!is_train && field != "test") {
      throw std::runtime_error("bad split value: " + field);
    }
    std::getline(row, field, ',');
    const int label = std::stoi(field);

    DomainDataset& ds = by_id[id];
    ds.domain_id = id;
    ds.input_dim = dim;
    for (std::size_t d = 0; d < dim; ++d) {
      if (!std::getline(row, field, ',')) {
        throw std::runtime_error("short dataset CSV row: " + line);
      }
      ds.xs.push_back(std::stod(field));
    }
    const std::size_t i = ds.ys.size();
    ds.ys.push_back(label);
    (is_train ? ds.train_idx : ds.test_idx).push_back(i);
  }
  std::vector<DomainDataset> out;
  for (auto& [id, ds] : by_id) {
    int max_label = 0;
    for (int y : ds.ys) max_label = std::max(max_label, y);
    ds.num_classes = static_cast<std::size_t>(max_label) + 1;
    out.push_back(std::move(ds));
  }
  return out;
}

}  // namespace fedadg
