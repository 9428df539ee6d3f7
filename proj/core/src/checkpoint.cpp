#include "drbl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace drbl {
namespace {

constexpr char kMagic[4] = {'D', 'R', 'B', 'L'};
constexpr std::uint32_t kMaxName = 1 << 12;
constexpr std::uint32_t kMaxRank = 8;

class Writer {
 public:
  void bytes(const void* data, std::size_t n) { out_.append(static_cast<const char*>(data), n); }
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void tensor(const NamedTensor& t) {
    str(t.name);
    u32(static_cast<std::uint32_t>(t.shape.size()));
    for (auto e : t.shape) u64(e);
    for (float v : t.values) f32(v);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw FormatError("checkpoint is truncated");
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(in_[pos_++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{static_cast<std::uint8_t>(in_[pos_++])} << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{static_cast<std::uint8_t>(in_[pos_++])} << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str(std::uint32_t limit) {
    const auto n = u32();
    if (n > limit) throw FormatError("checkpoint string field is implausibly long");
    need(n);
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  NamedTensor tensor() {
    NamedTensor t;
    t.name = str(kMaxName);
    const auto rank = u32();
    if (rank > kMaxRank) throw FormatError("tensor '" + t.name + "' has implausible rank");
    std::uint64_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      const auto e = u64();
      if (e != 0 && count > (in_.size() - pos_) / e) throw FormatError("checkpoint is truncated");
      count *= e;
      t.shape.push_back(e);
    }
    need(count * 4);
    t.values.resize(count);
    for (auto& v : t.values) v = f32();
    return t;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  std::string_view in_;
  std::size_t pos_ = 0;
};

NamedTensor snapshot(const std::string& name, const Tensor<float>& t) {
  return {name, t.shape(), std::vector<float>(t.values().begin(), t.values().end())};
}

}  // namespace

Checkpoint make_checkpoint(const ModelParams<float>& params, const AdamState<float>* adam,
                           double best_dev_accuracy, std::uint64_t seed) {
  Checkpoint c;
  c.config = params.config;
  for (const auto& p : params.tensors()) c.tensors.push_back(snapshot(p.name, p.tensor));
  if (adam) c.adam = *adam;
  c.best_dev_accuracy = best_dev_accuracy;
  c.seed = seed;
  return c;
}

ModelParams<float> restore_model(const Checkpoint& checkpoint, const Vocabulary& vocab) {
  auto params = ModelParams<float>::init(checkpoint.config, vocab);
  const auto targets = params.tensors();
  if (targets.size() != checkpoint.tensors.size()) {
    throw FormatError("checkpoint holds " + std::to_string(checkpoint.tensors.size()) +
                      " tensors, the configuration needs " + std::to_string(targets.size()));
  }
  for (std::size_t k = 0; k < targets.size(); ++k) {
    const auto& stored = checkpoint.tensors[k];
    Tensor<float> target = targets[k].tensor;
    if (stored.name != targets[k].name || stored.shape != target.shape()) {
      throw FormatError("checkpoint tensor '" + stored.name + "' " + shape_string(stored.shape) +
                        " does not match '" + targets[k].name + "' " + shape_string(target.shape()));
    }
    std::copy(stored.values.begin(), stored.values.end(), target.mutable_values().begin());
  }
  return params;
}

std::string serialize_checkpoint(const Checkpoint& c) {
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(c.version);
  w.str(c.config.to_text());
  w.f64(c.best_dev_accuracy);
  w.u64(c.seed);
  w.u32(static_cast<std::uint32_t>(c.tensors.size()));
  for (const auto& t : c.tensors) w.tensor(t);
  w.u8(c.adam ? 1 : 0);
  if (c.adam) {
    const auto& a = *c.adam;
    w.f64(a.config.learning_rate);
    w.f64(a.config.beta1);
    w.f64(a.config.beta2);
    w.f64(a.config.epsilon);
    w.u64(a.step);
    w.u32(static_cast<std::uint32_t>(a.names.size()));
    for (std::size_t k = 0; k < a.names.size(); ++k) {
      const Shape flat{a.first_moment[k].size()};
      w.tensor({a.names[k], flat, a.first_moment[k]});
      w.tensor({a.names[k], flat, a.second_moment[k]});
    }
  }
  return w.take();
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  r.need(4);
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("not a checkpoint (bad magic)");
  for (int i = 0; i < 4; ++i) r.u8();
  Checkpoint c;
  c.version = r.u32();
  if (c.version != kCheckpointVersion) {
    throw VersionError("checkpoint version " + std::to_string(c.version) + " is not supported (expected " +
                       std::to_string(kCheckpointVersion) + ")");
  }
  const std::string config_text = r.str(1 << 16);
  try {
    c.config = ModelConfig::from_text(config_text);
  } catch (const Error& e) {
    throw FormatError(std::string("checkpoint configuration is invalid: ") + e.what());
  }
  c.best_dev_accuracy = r.f64();
  c.seed = r.u64();
  const auto count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) c.tensors.push_back(r.tensor());
  if (r.u8()) {
    AdamState<float> a;
    a.config.learning_rate = r.f64();
    a.config.beta1 = r.f64();
    a.config.beta2 = r.f64();
    a.config.epsilon = r.f64();
    a.step = r.u64();
    const auto n = r.u32();
    for (std::uint32_t k = 0; k < n; ++k) {
      auto m = r.tensor();
      auto v = r.tensor();
      if (m.name != v.name || m.values.size() != v.values.size()) {
        throw FormatError("optimizer moments for '" + m.name + "' are inconsistent");
      }
      a.names.push_back(m.name);
      a.first_moment.push_back(std::move(m.values));
      a.second_moment.push_back(std::move(v.values));
    }
    c.adam = std::move(a);
  }
  if (!r.done()) throw FormatError("trailing bytes after checkpoint");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const std::string bytes = serialize_checkpoint(checkpoint);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return deserialize_checkpoint(buffer.str());
}

}  // namespace drbl
