#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "floff/util.hpp"

namespace floff {

enum class Arch : uint8_t { MLP = 1, LSTM = 2 };

// A dense tensor with explicit shape; values are kept in doubles but every
// stored model is float32-clean so the wire roundtrip is bit-exact.
struct Tensor {
  std::string name;
  std::vector<uint32_t> shape;
  std::vector<double> values;

  size_t count() const {
    size_t n = 1;
    for (uint32_t d : shape) n *= d;
    return n;
  }
  void quantize_f32() {
    for (double& v : values) v = double(float(v));
  }
  bool all_finite() const {
    for (double v : values)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

// Architecture hyper-parameters carried on the wire as a uint16 list.
// MLP:  [input, hidden..., classes]
// LSTM: [input, hidden, seq_len, classes]
struct ArchSpec {
  Arch arch = Arch::MLP;
  std::vector<uint16_t> dims;

  static ArchSpec mlp(const std::vector<uint16_t>& layer_dims) {
    if (layer_dims.size() < 2) throw Error(Err::invalid_argument, "mlp needs >= 2 dims");
    return {Arch::MLP, layer_dims};
  }
  static ArchSpec lstm(uint16_t input, uint16_t hidden, uint16_t seq_len, uint16_t classes) {
    return {Arch::LSTM, {input, hidden, seq_len, classes}};
  }

  uint16_t input_dim() const { return dims.at(0); }
  uint16_t num_classes() const { return dims.back(); }
  uint16_t lstm_hidden() const { return dims.at(1); }
  uint16_t seq_len() const { return arch == Arch::LSTM ? dims.at(2) : 1; }
  // width of one flattened example row
  size_t example_width() const { return size_t(input_dim()) * seq_len(); }

  void validate() const;
  // expected tensor names and shapes, in serialization order
  std::vector<Tensor> skeleton() const;

  bool operator==(const ArchSpec& o) const { return arch == o.arch && dims == o.dims; }
};

struct ModelWeights {
  ArchSpec spec;
  std::vector<Tensor> layers;

  Tensor& tensor(const std::string& name);
  const Tensor& tensor(const std::string& name) const;
  bool has_tensor(const std::string& name) const;

  void quantize_f32() {
    for (auto& t : layers) t.quantize_f32();
  }
  bool operator==(const ModelWeights& o) const;
};

// Deterministic initialization: weight matrices uniform(-s, s) with
// s = sqrt(6 / (fan_in + fan_out)), bias and normalization tensors zero.
ModelWeights init_model(const ArchSpec& spec, uint64_t seed);

// Element-wise mean, summed in the order given. Result is the exact
// double-precision mean (callers installing it on the wire re-quantize).
ModelWeights aggregate(const std::vector<ModelWeights>& models);

// Wire format for weights; trailing 8-byte FNV-1a checksum over everything
// before it. Tensor values are IEEE-754 binary32 little-endian.
Bytes serialize_weights(const ModelWeights& w);
ModelWeights deserialize_weights(std::span<const uint8_t> data);

// Model files are the wire bytes behind a 16-byte magic prefix.
extern const char kModelMagic[17];
void save_model_file(const ModelWeights& w, const std::string& path);
ModelWeights load_model_file(const std::string& path);

uint64_t weights_digest(const ModelWeights& w);

}  // namespace floff
