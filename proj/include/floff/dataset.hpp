#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "floff/nn.hpp"
#include "floff/util.hpp"

namespace floff {

enum class TaskType : uint8_t {
  CalculatorAdd = 1,
  CalculatorSub = 2,
  CalculatorMul = 3,
  CalculatorDiv = 4,
  MatrixMultiply = 5,
  FileCreate = 6,
  Sort = 7,
  Search = 8,
};
constexpr int kTaskTypeCount = 8;

const char* task_type_name(TaskType t);
TaskType task_type_from_name(const std::string& name);

enum class UserPref : uint8_t { LocalAccess = 0, RemoteAccess = 1 };

struct TaskDescriptor {
  TaskType type = TaskType::CalculatorAdd;
  uint64_t magnitude = 0;  // digits, matrix order, bytes, or element count
  UserPref pref = UserPref::LocalAccess;
};

struct NetworkSnapshot {
  double uplink_mbps = 0;
  double downlink_mbps = 0;
  double throughput_mbps = 0;
  double latency_ms = 0;
  double bandwidth_mbps = 0;

  std::array<double, 5> as_array() const {
    return {uplink_mbps, downlink_mbps, throughput_mbps, latency_ms, bandwidth_mbps};
  }
};
constexpr size_t kSnapshotFeatures = 5;
constexpr size_t kWindowLen = 10;
// one-hot task type + log-magnitude + scaled magnitude
constexpr size_t kStage1Features = kTaskTypeCount + 2;

struct Stage1Row {
  TaskDescriptor task;
  int label = 0;  // 1 = Intensive
};

struct Stage2Window {
  std::array<NetworkSnapshot, kWindowLen> steps;
  int label = 0;  // 1 = Offload
};

enum class DatasetKind : uint8_t { Stage1 = 1, Stage2 = 2 };

// A labeled dataset in raw (schema) form. Feature encoding happens when the
// rows are lowered to Examples for training or evaluation.
struct Dataset {
  DatasetKind kind = DatasetKind::Stage1;
  std::vector<Stage1Row> s1;
  std::vector<Stage2Window> s2;

  size_t size() const { return kind == DatasetKind::Stage1 ? s1.size() : s2.size(); }
  bool empty() const { return size() == 0; }
  void append(const Dataset& other);

  Examples to_examples() const;
  std::string to_csv() const;

  static Dataset from_csv(DatasetKind kind, const std::string& text);
  static Dataset load_csv(DatasetKind kind, const std::string& path);
  void save_csv(const std::string& path) const;
};

// identify a CSV payload by its header line
DatasetKind sniff_csv_kind(const std::string& text);

struct SplitPair {
  Dataset first;   // kept locally / training part
  Dataset second;  // offloaded / test part
};

// Seeded shuffle, then |first| = floor(fraction * n). first + second is a
// permutation of the input; rows are never divided.
SplitPair split_dataset(const Dataset& d, double first_fraction, uint64_t seed);

// 80/20 train/test split: train = floor(0.8 n)
SplitPair train_test_split(const Dataset& d, uint64_t seed);

// one flattened feature row for a stage-1 task descriptor
std::vector<double> featurize_task(const TaskDescriptor& t);
// one flattened feature row for a stage-2 window (raw values; the model
// carries min-max normalization in its weights)
std::vector<double> featurize_window(std::span<const NetworkSnapshot> window);

// Per-type work model shared by the label rule and the cost harness.
double task_work_units(TaskType type, uint64_t magnitude);
constexpr double kIntensiveWorkThreshold = 1e6;
bool intensive_by_rule(TaskType type, uint64_t magnitude);

// per-type magnitude where the work threshold sits (feature normalizer)
uint64_t intensive_magnitude_threshold(TaskType type);

Dataset generate_stage1_dataset(size_t n, uint64_t seed, double label_noise = 0.0);
Dataset generate_stage2_dataset(size_t n, uint64_t seed);

// Latent stage-2 label rule on a realized window (documented in README):
// offload iff nominal transmission cost beats the nominal local cost.
bool offload_by_rule(const Stage2Window& w);
NetworkSnapshot clear_regime_centroid();
NetworkSnapshot congested_regime_centroid();

}  // namespace floff
