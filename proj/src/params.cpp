#include "fedadg/params.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "fedadg/util.hpp"

static_assert(std::endian::native == std::endian::little,
              "wire format assumes a little-endian host");

namespace fedadg {

void ParameterVector::add(std::string name, const Tensor& t) {
  ParameterSegment seg;
  seg.name = std::move(name);
  seg.shape = t.shape();
  seg.values = t.values();
  add(std::move(seg));
}

void ParameterVector::add(ParameterSegment seg) {
  if (seg.name.empty()) {
    throw std::invalid_argument("parameter segment needs a name");
  }
  if (has(seg.name)) {
    throw std::invalid_argument("duplicate parameter segment: " + seg.name);
  }
  if (shape_size(seg.shape) != seg.values.size()) {
    throw std::invalid_argument("segment " + seg.name + " shape " +
                                shape_str(seg.shape) + " does not cover " +
                                std::to_string(seg.values.size()) + " values");
  }
  segments_.push_back(std::move(seg));
}

std::size_t ParameterVector::total_size() const {
  std::size_t n = 0;
  for (const auto& s : segments_) n += s.values.size();
  return n;
}

bool ParameterVector::has(const std::string& name) const {
  for (const auto& s : segments_) {
    if (s.name == name) return true;
  }
  return false;
}

const ParameterSegment& ParameterVector::at(const std::string& name) const {
  for (const auto& s : segments_) {
    if (s.name == name) return s;
  }
  throw std::out_of_range("no parameter segment named " + name);
}

void ParameterVector::restore_into(const std::string& name, Tensor& dst) const {
  const ParameterSegment& seg = at(name);
  if (seg.shape != dst.shape()) {
    throw std::runtime_error("segment " + name + " has shape " +
                             shape_str(seg.shape) + ", expected " +
                             shape_str(dst.shape()));
  }
  dst.values() = seg.values;
}

bool ParameterVector::same_layout(const ParameterVector& other) const {
  if (segments_.size() != other.segments_.size()) return false;
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    if (segments_[i].name != other.segments_[i].name ||
        segments_[i].shape != other.segments_[i].shape) {
      return false;
    }
  }
  return true;
}

void ParameterVector::accumulate(const ParameterVector& other) {
  if (!same_layout(other)) {
    throw std::runtime_error("accumulate: parameter layouts differ");
  }
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    auto& dst = segments_[i].values;
    const auto& src = other.segments_[i].values;
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
  }
}

void ParameterVector::scale_values(double factor) {
  for (auto& s : segments_) {
    for (double& v : s.values) v *= factor;
  }
}

bool ParameterVector::operator==(const ParameterVector& other) const {
  if (!same_layout(other)) return false;
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    if (segments_[i].values != other.segments_[i].values) return false;
  }
  return true;
}

namespace {

template <typename T>
void put(std::vector<std::uint8_t>& out, const T& v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t len) : data_(data), len_(len) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > len_) {
      throw std::runtime_error("parameter wire data truncated");
    }
    T v;
    std::memcpy(&v, data_ + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string get_string(std::size_t n) {
    if (pos_ + n > len_) {
      throw std::runtime_error("parameter wire data truncated");
    }
    std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == len_; }

 private:
  const std::uint8_t* data_;
  std::size_t len_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_segments(const ParameterVector& pv) {
  std::vector<std::uint8_t> out;
  put<std::uint64_t>(out, pv.num_segments());
  for (const auto& seg : pv.segments()) {
    put<std::uint64_t>(out, seg.name.size());
    out.insert(out.end(), seg.name.begin(), seg.name.end());
    put<std::uint64_t>(out, seg.shape.size());
    for (std::size_t d : seg.shape) put<std::uint64_t>(out, d);
    for (double v : seg.values) put<double>(out, v);
  }
  return out;
}

ParameterVector deserialize_segments(const std::uint8_t* data, std::size_t len) {
  Reader r(data, len);
  const auto count = r.get<std::uint64_t>();
  ParameterVector pv;
  for (std::uint64_t i = 0; i < count; ++i) {
    ParameterSegment seg;
    seg.name = r.get_string(r.get<std::uint64_t>());
    const auto rank = r.get<std::uint64_t>();
    for (std::uint64_t d = 0; d < rank; ++d) {
      seg.shape.push_back(r.get<std::uint64_t>());
    }
    const std::size_t n = shape_size(seg.shape);
    seg.values.reserve(n);
    for (std::size_t j = 0; j < n; ++j) seg.values.push_back(r.get<double>());
    pv.add(std::move(seg));
  }
  if (!r.done()) {
    throw std::runtime_error("parameter wire data has trailing bytes");
  }
  return pv;
}

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::vector<std::uint8_t> body = serialize_segments(ckpt.params);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f.write("FADG", 4);
  const std::uint32_t version = kCheckpointVersion;
  f.write(reinterpret_cast<const char*>(&version), sizeof(version));
  f.write(reinterpret_cast<const char*>(&ckpt.seed), sizeof(ckpt.seed));
  f.write(reinterpret_cast<const char*>(&ckpt.config_hash),
          sizeof(ckpt.config_hash));
  f.write(reinterpret_cast<const char*>(body.data()),
          static_cast<std::streamsize>(body.size()));
  if (!f) throw std::runtime_error("short write to " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::vector<std::uint8_t> raw((std::istreambuf_iterator<char>(f)),
                                std::istreambuf_iterator<char>());
  if (raw.size() < 4 + sizeof(std::uint32_t) + 2 * sizeof(std::uint64_t) ||
      std::memcmp(raw.data(), "FADG", 4) != 0) {
    throw std::runtime_error(path + " is not a checkpoint file");
  }
  std::size_t pos = 4;
  std::uint32_t version;
  std::memcpy(&version, raw.data() + pos, sizeof(version));
  pos += sizeof(version);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " +
                             std::to_string(version));
  }
  Checkpoint ckpt;
  std::memcpy(&ckpt.seed, raw.data() + pos, sizeof(ckpt.seed));
  pos += sizeof(ckpt.seed);
  std::memcpy(&ckpt.config_hash, raw.data() + pos, sizeof(ckpt.config_hash));
  pos += sizeof(ckpt.config_hash);
  ckpt.params = deserialize_segments(raw.data() + pos, raw.size() - pos);
  return ckpt;
}

}  // namespace fedadg
