#include <filesystem>

#include "doctest.h"
#include "floff/model.hpp"

using namespace floff;

namespace {
ModelWeights random_model(const ArchSpec& spec, uint64_t seed) {
  ModelWeights w = init_model(spec, seed);
  Rng r(seed ^ 0x5555);
  for (auto& t : w.layers)
    for (auto& v : t.values) v = r.uniform(-2.0, 2.0);
  return w;
}
}  // namespace

TEST_SUITE_BEGIN("model");

TEST_CASE("skeleton shapes for mlp and lstm") {
  ArchSpec m = ArchSpec::mlp({10, 64, 2});
  auto sk = m.skeleton();
  REQUIRE(sk.size() == 4);
  CHECK(sk[0].name == "dense0.W");
  CHECK(sk[0].shape == std::vector<uint32_t>{10, 64});
  CHECK(sk[1].name == "dense0.b");
  CHECK(sk[2].name == "out.W");
  CHECK(sk[2].shape == std::vector<uint32_t>{64, 2});
  CHECK(sk[3].name == "out.b");
  CHECK(m.example_width() == 10);

  ArchSpec l = ArchSpec::lstm(5, 32, 10, 2);
  auto sl = l.skeleton();
  REQUIRE(sl.size() == 7);
  CHECK(sl[0].name == "lstm.Wx");
  CHECK(sl[0].shape == std::vector<uint32_t>{5, 128});
  CHECK(sl[3].name == "head.W");
  CHECK(sl[4].name == "head.b");
  CHECK(sl[5].name == "norm.min");
  CHECK(sl[6].name == "norm.scale");
  CHECK(l.example_width() == 50);
}

TEST_CASE("arch validation") {
  CHECK_THROWS_AS(ArchSpec::mlp({10}), Error);
  ArchSpec bad;
  bad.arch = Arch::LSTM;
  bad.dims = {5, 32, 10};  // missing classes
  CHECK_THROWS_AS(bad.validate(), Error);
  ArchSpec zero = ArchSpec::mlp({10, 0, 2});
  CHECK_THROWS_AS(zero.validate(), Error);
}

TEST_CASE("init_model is deterministic and bounded") {
  ArchSpec spec = ArchSpec::mlp({10, 16, 2});
  ModelWeights a = init_model(spec, 7);
  ModelWeights b = init_model(spec, 7);
  CHECK(a == b);
  CHECK_FALSE(a == init_model(spec, 8));
  // weight matrices bounded by sqrt(6/(fan_in+fan_out)); biases zero
  double s0 = std::sqrt(6.0 / (10 + 16));
  for (double v : a.tensor("dense0.W").values) CHECK(std::abs(v) <= s0);
  for (double v : a.tensor("dense0.b").values) CHECK(v == 0.0);
}

TEST_CASE("aggregate is the exact double mean in given order") {
  ArchSpec spec = ArchSpec::mlp({4, 3, 2});
  std::vector<ModelWeights> models;
  for (uint64_t s = 0; s < 5; s++) models.push_back(random_model(spec, s));
  ModelWeights mean = aggregate(models);
  for (size_t t = 0; t < mean.layers.size(); t++) {
    for (size_t i = 0; i < mean.layers[t].values.size(); i++) {
      double sum = 0;
      for (const auto& m : models) sum += m.layers[t].values[i];
      CHECK(mean.layers[t].values[i] == sum / 5.0);
    }
  }
  CHECK_THROWS_AS(aggregate({}), Error);
  // mixed architectures refuse to aggregate
  std::vector<ModelWeights> mixed{models[0], random_model(ArchSpec::mlp({4, 5, 2}), 1)};
  CHECK_THROWS_AS(aggregate(mixed), Error);
}

TEST_CASE("serialize/deserialize weights is bit-exact") {
  for (ArchSpec spec : {ArchSpec::mlp({10, 8, 2}), ArchSpec::lstm(5, 6, 10, 2)}) {
    ModelWeights w = random_model(spec, 3);
    w.quantize_f32();
    Bytes wire = serialize_weights(w);
    ModelWeights back = deserialize_weights(wire);
    CHECK(back == w);
    CHECK(weights_digest(back) == weights_digest(w));

    SUBCASE("corrupted checksum is rejected") {}
    Bytes bad = wire;
    bad.back() ^= 0x01;
    CHECK_THROWS_AS(deserialize_weights(bad), Error);
    Bytes mid = wire;
    mid[mid.size() / 2] ^= 0x80;
    CHECK_THROWS_AS(deserialize_weights(mid), Error);
    Bytes trunc(wire.begin(), wire.end() - 3);
    CHECK_THROWS_AS(deserialize_weights(trunc), Error);
  }
}

TEST_CASE("weight wire format rejects wrong version and arch id") {
  ModelWeights w = random_model(ArchSpec::mlp({4, 3, 2}), 1);
  w.quantize_f32();
  Bytes wire = serialize_weights(w);
  CHECK(wire[0] == 0x00);  // version 0x0001 big-endian
  CHECK(wire[1] == 0x01);
  CHECK(wire[2] == 0x01);  // arch id MLP=1
  Bytes futur = wire;
  futur[1] = 0x02;
  CHECK_THROWS_AS(deserialize_weights(futur), Error);
  Bytes badarch = wire;
  badarch[2] = 0x09;
  CHECK_THROWS_AS(deserialize_weights(badarch), Error);
}

TEST_CASE("model files carry magic prefix") {
  auto path = (std::filesystem::temp_directory_path() / "floff_model_test.bin").string();
  ModelWeights w = random_model(ArchSpec::lstm(5, 4, 10, 2), 11);
  w.quantize_f32();
  save_model_file(w, path);
  std::string raw = read_file(path);
  REQUIRE(raw.size() > 16);
  CHECK(raw.compare(0, 11, "FLDEC-MODEL") == 0);
  ModelWeights back = load_model_file(path);
  CHECK(back == w);
  write_file(path, std::string("FLDEC-MODEL\0\0\0\0\0garbage", 23));
  CHECK_THROWS_AS(load_model_file(path), Error);
  write_file(path, std::string("not a model"));
  CHECK_THROWS_AS(load_model_file(path), Error);
  std::filesystem::remove(path);
}

TEST_CASE("digest is sensitive to every value") {
  ModelWeights w = random_model(ArchSpec::mlp({3, 2, 2}), 5);
  w.quantize_f32();
  uint64_t d0 = weights_digest(w);
  w.tensor("out.b").values[1] += 0.25;
  CHECK(weights_digest(w) != d0);
}

TEST_SUITE_END();
