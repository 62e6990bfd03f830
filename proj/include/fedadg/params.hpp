#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "fedadg/tensor.hpp"

namespace fedadg {

// Flat, named, shaped view of trainable weights — the unit that crosses the
// client/server boundary and the payload of checkpoints. Segment order is
// canonical: whatever order the owning component lists its tensors in.
struct ParameterSegment {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

class ParameterVector {
 public:
  ParameterVector() = default;

  void add(std::string name, const Tensor& t);
  void add(ParameterSegment seg);

  const std::vector<ParameterSegment>& segments() const { return segments_; }
  std::size_t num_segments() const { return segments_.size(); }
  std::size_t total_size() const;
  bool has(const std::string& name) const;
  const ParameterSegment& at(const std::string& name) const;

  // Copies values into `dst`, which must match name and shape exactly.
  void restore_into(const std::string& name, Tensor& dst) const;

  bool same_layout(const ParameterVector& other) const;

  // out += other, out *= factor — the aggregation arithmetic of Step s3.
  void accumulate(const ParameterVector& other);
  void scale_values(double factor);

  bool operator==(const ParameterVector& other) const;

 private:
  std::vector<ParameterSegment> segments_;
};

// Wire format shared by RoundMessages and checkpoints: little-endian u64
// segment count, then per segment (u64 name length, name bytes, u64 rank,
// u64 dims..., f64 values...).
std::vector<std::uint8_t> serialize_segments(const ParameterVector& pv);
ParameterVector deserialize_segments(const std::uint8_t* data, std::size_t len);

// Checkpoint file: magic "FADG", u32 format version, u64 experiment seed,
// u64 config hash, then the segment wire format. Bit-exact round trip.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  ParameterVector params;
};

void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

}  // namespace fedadg
