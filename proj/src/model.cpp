#include "floff/model.hpp"

#include <algorithm>
#include <cmath>

namespace floff {

void ArchSpec::validate() const {
  if (arch != Arch::MLP && arch != Arch::LSTM)
    throw Error(Err::invalid_argument, "unknown architecture id");
  if (arch == Arch::MLP) {
    if (dims.size() < 2) throw Error(Err::invalid_argument, "mlp descriptor needs >= 2 dims");
  } else {
    if (dims.size() != 4) throw Error(Err::invalid_argument, "lstm descriptor needs 4 dims");
  }
  for (uint16_t d : dims)
    if (d == 0) throw Error(Err::invalid_argument, "descriptor dimension is zero");
  if (num_classes() < 2) throw Error(Err::invalid_argument, "need >= 2 classes");
}

std::vector<Tensor> ArchSpec::skeleton() const {
  validate();
  std::vector<Tensor> out;
  if (arch == Arch::MLP) {
    for (size_t i = 0; i + 1 < dims.size(); i++) {
      bool last = i + 2 == dims.size();
      std::string base = last ? "out" : "dense" + std::to_string(i);
      out.push_back({base + ".W", {dims[i], dims[i + 1]}, {}});
      out.push_back({base + ".b", {dims[i + 1]}, {}});
    }
  } else {
    uint32_t d = dims[0], h = dims[1], c = dims[3];
    out.push_back({"lstm.Wx", {d, 4 * h}, {}});
    out.push_back({"lstm.Wh", {h, 4 * h}, {}});
    out.push_back({"lstm.b", {4 * h}, {}});
    out.push_back({"head.W", {h, c}, {}});
    out.push_back({"head.b", {c}, {}});
    out.push_back({"norm.min", {d}, {}});
    out.push_back({"norm.scale", {d}, {}});
  }
  for (auto& t : out) t.values.assign(t.count(), 0.0);
  return out;
}

Tensor& ModelWeights::tensor(const std::string& name) {
  for (auto& t : layers)
    if (t.name == name) return t;
  throw Error(Err::invalid_argument, "no tensor named " + name);
}

const Tensor& ModelWeights::tensor(const std::string& name) const {
  for (const auto& t : layers)
    if (t.name == name) return t;
  throw Error(Err::invalid_argument, "no tensor named " + name);
}

bool ModelWeights::has_tensor(const std::string& name) const {
  for (const auto& t : layers)
    if (t.name == name) return true;
  return false;
}

bool ModelWeights::operator==(const ModelWeights& o) const {
  if (!(spec == o.spec) || layers.size() != o.layers.size()) return false;
  for (size_t i = 0; i < layers.size(); i++) {
    if (layers[i].name != o.layers[i].name || layers[i].shape != o.layers[i].shape) return false;
    const auto& a = layers[i].values;
    const auto& b = o.layers[i].values;
    if (a.size() != b.size()) return false;
    // bitwise comparison, so -0.0 != 0.0 and NaN == NaN by representation
    if (std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) != 0) return false;
  }
  return true;
}

ModelWeights init_model(const ArchSpec& spec, uint64_t seed) {
  ModelWeights w{spec, spec.skeleton()};
  Rng rng(seed);
  for (auto& t : w.layers) {
    bool is_weight = t.shape.size() == 2 && t.name.find("norm.") != 0;
    if (!is_weight) continue;  // biases and normalization stats stay zero
    double fan_in = t.shape[0], fan_out = t.shape[1];
    double s = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& v : t.values) v = rng.uniform(-s, s);
  }
  w.quantize_f32();
  return w;
}

ModelWeights aggregate(const std::vector<ModelWeights>& models) {
  if (models.empty()) throw Error(Err::invalid_argument, "aggregate: no models");
  const ModelWeights& first = models[0];
  for (size_t m = 1; m < models.size(); m++) {
    const ModelWeights& cur = models[m];
    if (!(cur.spec == first.spec))
      throw Error(Err::invalid_argument,
                  "aggregate: descriptor mismatch at model index " + std::to_string(m));
    if (cur.layers.size() != first.layers.size())
      throw Error(Err::invalid_argument,
                  "aggregate: layer count mismatch at model index " + std::to_string(m));
    for (size_t i = 0; i < cur.layers.size(); i++)
      if (cur.layers[i].name != first.layers[i].name ||
          cur.layers[i].shape != first.layers[i].shape)
        throw Error(Err::invalid_argument,
                    "aggregate: tensor mismatch at model index " + std::to_string(m) +
                        " tensor " + cur.layers[i].name);
  }
  ModelWeights out = first;
  for (auto& t : out.layers) std::fill(t.values.begin(), t.values.end(), 0.0);
  for (const auto& m : models)
    for (size_t i = 0; i < m.layers.size(); i++) {
      const auto& src = m.layers[i].values;
      auto& dst = out.layers[i].values;
      for (size_t k = 0; k < src.size(); k++) dst[k] += src[k];
    }
  const double n = double(models.size());
  for (auto& t : out.layers)
    for (double& v : t.values) v /= n;
  return out;
}

Bytes serialize_weights(const ModelWeights& w) {
  w.spec.validate();
  ByteWriter out;
  out.u16be(0x0001);
  out.u8(uint8_t(w.spec.arch));
  if (w.spec.dims.size() > 0xffff) throw Error(Err::invalid_argument, "descriptor too long");
  out.u16be(uint16_t(w.spec.dims.size()));
  for (uint16_t d : w.spec.dims) out.u16be(d);
  out.u32be(uint32_t(w.layers.size()));
  for (const auto& t : w.layers) {
    if (t.name.empty() || t.name.size() > 255)
      throw Error(Err::invalid_argument, "tensor name length out of range");
    if (t.shape.size() > 255) throw Error(Err::invalid_argument, "tensor rank out of range");
    if (t.values.size() != t.count())
      throw Error(Err::invalid_argument, "tensor value count does not match shape");
    out.u8(uint8_t(t.name.size()));
    out.str(t.name);
    out.u8(uint8_t(t.shape.size()));
    for (uint32_t d : t.shape) out.u32be(d);
    for (double v : t.values) out.f32le(float(v));
  }
  uint64_t sum = fnv1a64(std::span<const uint8_t>(out.data().data(), out.size()));
  out.u64be(sum);
  return out.take();
}

ModelWeights deserialize_weights(std::span<const uint8_t> data) {
  if (data.size() < 8) throw Error(Err::protocol, "weight payload too short");
  uint64_t stored = 0;
  for (size_t i = data.size() - 8; i < data.size(); i++) stored = stored << 8 | data[i];
  uint64_t computed = fnv1a64(data.subspan(0, data.size() - 8));
  if (stored != computed) throw Error(Err::protocol, "weight payload checksum mismatch");

  ByteReader in(data.subspan(0, data.size() - 8));
  uint16_t version = in.u16be();
  if (version != 0x0001) throw Error(Err::protocol, "unsupported weight format version");
  uint8_t arch_id = in.u8();
  if (arch_id != uint8_t(Arch::MLP) && arch_id != uint8_t(Arch::LSTM))
    throw Error(Err::protocol, "unknown architecture id");
  ArchSpec spec;
  spec.arch = Arch(arch_id);
  uint16_t ndims = in.u16be();
  spec.dims.resize(ndims);
  for (auto& d : spec.dims) d = in.u16be();
  spec.validate();

  uint32_t ntensors = in.u32be();
  ModelWeights w;
  w.spec = spec;
  w.layers.reserve(ntensors);
  for (uint32_t i = 0; i < ntensors; i++) {
    Tensor t;
    uint8_t name_len = in.u8();
    t.name = in.str(name_len);
    uint8_t rank = in.u8();
    t.shape.resize(rank);
    size_t n = 1;
    for (auto& d : t.shape) {
      d = in.u32be();
      if (d == 0 || n > (1u << 28) / std::max<size_t>(d, 1))
        throw Error(Err::protocol, "tensor dimensions out of range");
      n *= d;
    }
    t.values.resize(n);
    for (auto& v : t.values) {
      float f = in.f32le();
      if (!std::isfinite(f)) throw Error(Err::protocol, "non-finite tensor value");
      v = double(f);
    }
    w.layers.push_back(std::move(t));
  }
  if (!in.done()) throw Error(Err::protocol, "trailing bytes in weight payload");

  // shapes must agree with what the descriptor promises
  auto expect = spec.skeleton();
  if (expect.size() != w.layers.size())
    throw Error(Err::protocol, "tensor list does not match architecture descriptor");
  for (size_t i = 0; i < expect.size(); i++)
    if (expect[i].name != w.layers[i].name || expect[i].shape != w.layers[i].shape)
      throw Error(Err::protocol, "tensor " + w.layers[i].name + " does not match descriptor");
  return w;
}

const char kModelMagic[17] = "FLDEC-MODEL\0\0\0\0\0";

void save_model_file(const ModelWeights& w, const std::string& path) {
  Bytes body = serialize_weights(w);
  Bytes out;
  out.reserve(16 + body.size());
  out.insert(out.end(), kModelMagic, kModelMagic + 16);
  out.insert(out.end(), body.begin(), body.end());
  write_file(path, out);
}

ModelWeights load_model_file(const std::string& path) {
  std::string raw = read_file(path);
  if (raw.size() < 16 || std::memcmp(raw.data(), kModelMagic, 16) != 0)
    throw Error(Err::protocol, "not a model file: " + path);
  return deserialize_weights(std::span<const uint8_t>(
      reinterpret_cast<const uint8_t*>(raw.data()) + 16, raw.size() - 16));
}

uint64_t weights_digest(const ModelWeights& w) {
  Bytes b = serialize_weights(w);
  return fnv1a64(b);
}

}  // namespace floff
