#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "fedadg/rng.hpp"
#include "fedadg/tensor.hpp"

namespace fedadg {

enum class DomainFamily { rotated_two_moons, shifted_gaussian_mixture };

std::string family_name(DomainFamily f);
DomainFamily family_from_name(const std::string& name);

// One synthetic domain. The domain parameter is a rotation angle in degrees:
// two-moons rotates the whole point cloud, the gaussian mixture rotates the
// class layout in dims (0,1). Angles are taken mod 360 so 0 and 360 generate
// bit-identical data.
struct DomainSpec {
  DomainFamily family = DomainFamily::rotated_two_moons;
  double angle_deg = 0.0;
  std::size_t samples = 500;
  double noise = 0.1;
  std::size_t input_dim = 2;   // fixed at 2 for two-moons
  std::size_t num_classes = 2; // fixed at 2 for two-moons
  std::uint64_t seed = 0;
};

struct DomainDataset {
  int domain_id = 0;
  std::size_t input_dim = 0;
  std::size_t num_classes = 0;
  std::vector<double> xs;  // row-major [n x input_dim]
  std::vector<int> ys;
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> test_idx;

  std::size_t size() const { return ys.size(); }
};

DomainDataset generate_domain(const DomainSpec& spec, int domain_id);

// Leave-one-domain-out: K = params.size()-1 sources plus one target.
struct ExperimentSplit {
  std::vector<DomainDataset> sources;
  DomainDataset target;
};

struct SuiteSpec {
  DomainFamily family = DomainFamily::rotated_two_moons;
  std::vector<double> domain_angles = {0.0, 15.0, 30.0, 45.0};
  std::size_t samples_per_domain = 500;
  double noise = 0.1;
  std::size_t input_dim = 2;
  std::size_t num_classes = 2;
};

ExperimentSplit make_split(const SuiteSpec& suite, std::size_t target_index,
                           std::uint64_t seed);

// One epoch of mini-batch index lists: seeded shuffle, final short batch kept.
std::vector<std::vector<std::size_t>> epoch_batches(
    const std::vector<std::size_t>& indices, std::size_t batch_size, Rng& rng);

// Materializes (x, y) for the given sample indices.
std::pair<Tensor, std::vector<int>> gather(const DomainDataset& ds,
                                           const std::vector<std::size_t>& idx);

// CSV dump/load, columns: domain_id,split,label,x_0..x_{d-1}. Values are
// printed with %.17g so a round trip is bit-exact.
void dump_datasets_csv(std::ostream& out,
                       const std::vector<const DomainDataset*>& datasets);
std::vector<DomainDataset> load_datasets_csv(std::istream& in);

}  // namespace fedadg
