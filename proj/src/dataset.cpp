#include "floff/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace floff {

const char* task_type_name(TaskType t) {
  switch (t) {
    case TaskType::CalculatorAdd: return "calc_add";
    case TaskType::CalculatorSub: return "calc_sub";
    case TaskType::CalculatorMul: return "calc_mul";
    case TaskType::CalculatorDiv: return "calc_div";
    case TaskType::MatrixMultiply: return "matmul";
    case TaskType::FileCreate: return "file_create";
    case TaskType::Sort: return "sort";
    case TaskType::Search: return "search";
  }
  throw Error(Err::invalid_argument, "bad task type");
}

TaskType task_type_from_name(const std::string& name) {
  for (int i = 1; i <= kTaskTypeCount; i++)
    if (name == task_type_name(TaskType(i))) return TaskType(i);
  throw Error(Err::invalid_argument, "unknown task type: " + name);
}

double task_work_units(TaskType type, uint64_t magnitude) {
  double m = double(magnitude);
  switch (type) {
    case TaskType::CalculatorAdd:
    case TaskType::CalculatorSub: return m;          // digit additions
    case TaskType::CalculatorMul:
    case TaskType::CalculatorDiv: return m * m;      // digit-by-digit products
    case TaskType::MatrixMultiply: return m * m * m; // naive triple loop
    case TaskType::FileCreate: return m;             // bytes written
    case TaskType::Sort: return m > 1 ? m * std::log2(m) : 1.0;
    case TaskType::Search: return m;                 // linear scan
  }
  throw Error(Err::invalid_argument, "bad task type");
}

bool intensive_by_rule(TaskType type, uint64_t magnitude) {
  return task_work_units(type, magnitude) >= kIntensiveWorkThreshold;
}

uint64_t intensive_magnitude_threshold(TaskType type) {
  switch (type) {
    case TaskType::CalculatorAdd:
    case TaskType::CalculatorSub: return 1000000;
    case TaskType::CalculatorMul:
    case TaskType::CalculatorDiv: return 1000;
    case TaskType::MatrixMultiply: return 100;
    case TaskType::FileCreate: return 1000000;
    case TaskType::Sort: return 62747;  // m log2 m crosses 1e6 here
    case TaskType::Search: return 1000000;
  }
  throw Error(Err::invalid_argument, "bad task type");
}

std::vector<double> featurize_task(const TaskDescriptor& t) {
  std::vector<double> f(kTaskTypeCount + 2, 0.0);
  int idx = int(t.type) - 1;
  if (idx < 0 || idx >= kTaskTypeCount) throw Error(Err::invalid_argument, "bad task type");
  f[size_t(idx)] = 1.0;
  f[kTaskTypeCount] = std::log10(1.0 + double(t.magnitude));
  f[kTaskTypeCount + 1] =
      double(t.magnitude) / double(intensive_magnitude_threshold(t.type));
  return f;
}

std::vector<double> featurize_window(std::span<const NetworkSnapshot> window) {
  std::vector<double> f;
  f.reserve(window.size() * kSnapshotFeatures);
  for (const auto& s : window)
    for (double v : s.as_array()) f.push_back(v);
  return f;
}

void Dataset::append(const Dataset& other) {
  if (other.kind != kind) throw Error(Err::invalid_argument, "dataset kind mismatch");
  s1.insert(s1.end(), other.s1.begin(), other.s1.end());
  s2.insert(s2.end(), other.s2.begin(), other.s2.end());
}

Examples Dataset::to_examples() const {
  Examples ex;
  if (kind == DatasetKind::Stage1) {
    ex.width = kTaskTypeCount + 2;
    ex.classes = 2;
    for (const auto& r : s1) {
      auto f = featurize_task(r.task);
      ex.push(f, r.label);
    }
  } else {
    ex.width = kWindowLen * kSnapshotFeatures;
    ex.classes = 2;
    for (const auto& w : s2) {
      auto f = featurize_window(std::span<const NetworkSnapshot>(w.steps.data(), w.steps.size()));
      ex.push(f, w.label);
    }
  }
  return ex;
}

namespace {
const char* kStage1Header = "task_type,input_magnitude,user_pref,label";
const char* kStage2Header = "uplink_mbps,downlink_mbps,throughput_mbps,latency_ms,bandwidth_mbps,label";

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}
}  // namespace

std::string Dataset::to_csv() const {
  std::ostringstream out;
  if (kind == DatasetKind::Stage1) {
    out << kStage1Header << "\n";
    for (const auto& r : s1)
      out << task_type_name(r.task.type) << "," << r.task.magnitude << ","
          << (r.task.pref == UserPref::RemoteAccess ? "remote" : "local") << "," << r.label
          << "\n";
  } else {
    out << kStage2Header << "\n";
    for (const auto& w : s2)
      for (const auto& s : w.steps)
        out << format_double(s.uplink_mbps) << "," << format_double(s.downlink_mbps) << ","
            << format_double(s.throughput_mbps) << "," << format_double(s.latency_ms) << ","
            << format_double(s.bandwidth_mbps) << "," << w.label << "\n";
  }
  return out.str();
}

DatasetKind sniff_csv_kind(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(Err::io, "csv: empty file");
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
  if (line == kStage1Header) return DatasetKind::Stage1;
  if (line == kStage2Header) return DatasetKind::Stage2;
  throw Error(Err::io, "csv: unrecognized header: " + line);
}

Dataset Dataset::from_csv(DatasetKind kind, const std::string& text) {
  Dataset d;
  d.kind = kind;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(Err::io, "csv: empty file");
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
  const char* want = kind == DatasetKind::Stage1 ? kStage1Header : kStage2Header;
  if (line != want) throw Error(Err::io, "csv: unexpected header: " + line);

  std::vector<NetworkSnapshot> pending;
  std::vector<int> pending_labels;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    lineno++;
    if (line.empty() || line == "\r") continue;
    auto cols = split_csv_line(line);
    if (kind == DatasetKind::Stage1) {
      if (cols.size() != 4)
        throw Error(Err::io, "csv line " + std::to_string(lineno) + ": want 4 columns");
      Stage1Row r;
      r.task.type = task_type_from_name(cols[0]);
      r.task.magnitude = parse_u64(cols[1]);
      if (cols[2] == "local")
        r.task.pref = UserPref::LocalAccess;
      else if (cols[2] == "remote")
        r.task.pref = UserPref::RemoteAccess;
      else
        throw Error(Err::io, "csv line " + std::to_string(lineno) + ": bad user_pref");
      int label = int(parse_i64(cols[3]));
      if (label != 0 && label != 1)
        throw Error(Err::io, "csv line " + std::to_string(lineno) + ": bad label");
      r.label = label;
      d.s1.push_back(r);
    } else {
      if (cols.size() != 6)
        throw Error(Err::io, "csv line " + std::to_string(lineno) + ": want 6 columns");
      NetworkSnapshot s;
      s.uplink_mbps = parse_double(cols[0]);
      s.downlink_mbps = parse_double(cols[1]);
      s.throughput_mbps = parse_double(cols[2]);
      s.latency_ms = parse_double(cols[3]);
      s.bandwidth_mbps = parse_double(cols[4]);
      int label = int(parse_i64(cols[5]));
      if (label != 0 && label != 1)
        throw Error(Err::io, "csv line " + std::to_string(lineno) + ": bad label");
      for (double v : s.as_array())
        if (!std::isfinite(v) || v < 0)
          throw Error(Err::io, "csv line " + std::to_string(lineno) + ": bad snapshot value");
      pending.push_back(s);
      pending_labels.push_back(label);
      if (pending.size() == kWindowLen) {
        Stage2Window w;
        std::copy(pending.begin(), pending.end(), w.steps.begin());
        w.label = pending_labels.back();  // window labeled by its final row
        d.s2.push_back(w);
        pending.clear();
        pending_labels.clear();
      }
    }
  }
  // a trailing partial window is dropped
  return d;
}

Dataset Dataset::load_csv(DatasetKind kind, const std::string& path) {
  return from_csv(kind, read_file(path));
}

void Dataset::save_csv(const std::string& path) const { write_file(path, to_csv()); }

SplitPair split_dataset(const Dataset& d, double first_fraction, uint64_t seed) {
  if (first_fraction < 0 || first_fraction > 1)
    throw Error(Err::invalid_argument, "split fraction out of [0,1]");
  size_t n = d.size();
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; i++) order[i] = i;
  Rng rng(derive_seed(seed, 0x5011u));
  rng.shuffle(order);
  size_t take = size_t(std::floor(first_fraction * double(n)));
  SplitPair out;
  out.first.kind = out.second.kind = d.kind;
  for (size_t i = 0; i < n; i++) {
    Dataset& dst = i < take ? out.first : out.second;
    if (d.kind == DatasetKind::Stage1)
      dst.s1.push_back(d.s1[order[i]]);
    else
      dst.s2.push_back(d.s2[order[i]]);
  }
  return out;
}

SplitPair train_test_split(const Dataset& d, uint64_t seed) {
  return split_dataset(d, 0.8, derive_seed(seed, 0x8020u));
}

NetworkSnapshot clear_regime_centroid() { return {40, 60, 60, 30, 100}; }
NetworkSnapshot congested_regime_centroid() { return {85, 90, 12, 250, 25}; }

namespace {
struct Regime {
  NetworkSnapshot mean;
  NetworkSnapshot sd;
};

Regime clear_regime() { return {clear_regime_centroid(), {8, 10, 20, 10, 15}}; }
Regime congested_regime() { return {congested_regime_centroid(), {15, 15, 6, 60, 10}}; }

double clip_pos(double v) { return v < 0.1 ? 0.1 : v; }
}  // namespace

bool offload_by_rule(const Stage2Window& w) {
  double thr = 0, lat = 0;
  for (const auto& s : w.steps) {
    thr += s.throughput_mbps;
    lat += s.latency_ms;
  }
  thr /= double(w.steps.size());
  lat /= double(w.steps.size());
  // nominal 40 Mbit task against a nominal 2 s local run
  double tx_cost = 40.0 / thr + 2.0 * lat / 1000.0;
  return tx_cost < 2.0;
}

Dataset generate_stage1_dataset(size_t n, uint64_t seed, double label_noise) {
  Dataset d;
  d.kind = DatasetKind::Stage1;
  Rng rng(derive_seed(seed, 0xD57A6E1ull));
  auto draw_type = [&]() -> TaskType {
    // calculators 4% each, the four heavy types 21% each
    uint64_t r = rng.below(100);
    if (r < 16) return TaskType(1 + r / 4);
    return TaskType(5 + (r - 16) / 21);
  };
  auto draw_magnitude = [&](TaskType t) -> uint64_t {
    auto log_uniform = [&](double lo, double hi) {
      return uint64_t(std::llround(std::exp(rng.uniform(std::log(lo), std::log(hi)))));
    };
    switch (t) {
      case TaskType::CalculatorAdd:
      case TaskType::CalculatorSub:
      case TaskType::CalculatorMul:
      case TaskType::CalculatorDiv: return 1 + rng.below(9);  // digit count
      case TaskType::MatrixMultiply: return log_uniform(50, 2000);
      case TaskType::FileCreate: return log_uniform(1e4, 1e8);
      case TaskType::Sort: return log_uniform(1e3, 1e7);
      case TaskType::Search: return log_uniform(1e3, 1e9);
    }
    return 1;
  };
  for (size_t i = 0; i < n; i++) {
    int target = int(i % 2);  // alternate so classes stay balanced
    Stage1Row row;
    for (;;) {
      TaskType t = draw_type();
      uint64_t m = draw_magnitude(t);
      int label = intensive_by_rule(t, m) ? 1 : 0;
      if (label == target) {
        row.task.type = t;
        row.task.magnitude = m;
        row.label = label;
        break;
      }
    }
    row.task.pref = rng.below(2) ? UserPref::RemoteAccess : UserPref::LocalAccess;
    if (label_noise > 0 && rng.uniform01() < label_noise) row.label = 1 - row.label;
    d.s1.push_back(row);
  }
  return d;
}

Dataset generate_stage2_dataset(size_t n, uint64_t seed) {
  Dataset d;
  d.kind = DatasetKind::Stage2;
  Rng rng(derive_seed(seed, 0xD57A6E2ull));
  for (size_t i = 0; i < n; i++) {
    Regime reg = rng.below(2) ? congested_regime() : clear_regime();
    auto m = reg.mean.as_array();
    auto sd = reg.sd.as_array();
    // each window drifts around its own center inside the regime
    std::array<double, 5> center;
    for (size_t f = 0; f < 5; f++) center[f] = m[f] + rng.normal(0, sd[f]);
    Stage2Window w;
    std::array<double, 5> prev = center;
    for (size_t t = 0; t < kWindowLen; t++) {
      std::array<double, 5> cur;
      for (size_t f = 0; f < 5; f++) {
        cur[f] = clip_pos(center[f] + 0.5 * (prev[f] - center[f]) + rng.normal(0, sd[f] * 0.15));
      }
      prev = cur;
      w.steps[t] = {cur[0], cur[1], cur[2], cur[3], cur[4]};
    }
    w.label = offload_by_rule(w) ? 1 : 0;
    d.s2.push_back(w);
  }
  return d;
}

}  // namespace floff
