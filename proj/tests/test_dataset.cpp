#include <cmath>
#include <set>
#include <sstream>

#include "doctest.h"
#include "floff/dataset.hpp"

using namespace floff;

namespace {
// order-independent fingerprint of a dataset's rows
std::multiset<std::string> row_set(const Dataset& d) {
  std::multiset<std::string> out;
  std::istringstream in(d.to_csv());
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line))
    if (!line.empty()) out.insert(line);
  return out;
}
}  // namespace

TEST_SUITE_BEGIN("dataset");

TEST_CASE("task type names roundtrip") {
  for (int i = 1; i <= kTaskTypeCount; i++) {
    TaskType t = TaskType(i);
    CHECK(task_type_from_name(task_type_name(t)) == t);
  }
  CHECK(std::string(task_type_name(TaskType::MatrixMultiply)) == "matmul");
  CHECK_THROWS_AS(task_type_from_name("bogus"), Error);
}

TEST_CASE("work model and intensity rule") {
  CHECK(task_work_units(TaskType::CalculatorAdd, 12) == 12.0);
  CHECK(task_work_units(TaskType::CalculatorMul, 1000) == 1e6);
  CHECK(task_work_units(TaskType::MatrixMultiply, 100) == 1e6);
  CHECK(task_work_units(TaskType::FileCreate, 123456) == 123456.0);
  CHECK(task_work_units(TaskType::Sort, 1024) == 1024.0 * 10.0);
  CHECK(task_work_units(TaskType::Search, 5000) == 5000.0);

  CHECK_FALSE(intensive_by_rule(TaskType::MatrixMultiply, 99));
  CHECK(intensive_by_rule(TaskType::MatrixMultiply, 100));
  CHECK_FALSE(intensive_by_rule(TaskType::CalculatorMul, 999));
  CHECK(intensive_by_rule(TaskType::CalculatorMul, 1000));
  // threshold magnitudes are the smallest intensive magnitude per type
  for (int i = 1; i <= kTaskTypeCount; i++) {
    TaskType t = TaskType(i);
    uint64_t m = intensive_magnitude_threshold(t);
    CHECK(intensive_by_rule(t, m));
    CHECK_FALSE(intensive_by_rule(t, m - 1));
  }
  CHECK(intensive_magnitude_threshold(TaskType::Sort) == 62747);
}

TEST_CASE("stage-1 features are one-hot plus magnitudes") {
  TaskDescriptor t;
  t.type = TaskType::Sort;
  t.magnitude = 1000;
  t.pref = UserPref::RemoteAccess;
  auto f = featurize_task(t);
  REQUIRE(f.size() == kStage1Features);
  for (int i = 0; i < kTaskTypeCount; i++)
    CHECK(f[i] == (TaskType(i + 1) == TaskType::Sort ? 1.0 : 0.0));
  CHECK(f[kTaskTypeCount] == doctest::Approx(std::log10(1.0 + 1000.0)));
  CHECK(f[kTaskTypeCount + 1] ==
        doctest::Approx(1000.0 / double(intensive_magnitude_threshold(TaskType::Sort))));
}

TEST_CASE("stage-2 features flatten the window time-major") {
  std::vector<NetworkSnapshot> win(kWindowLen);
  for (size_t i = 0; i < kWindowLen; i++) {
    win[i].uplink_mbps = double(i);
    win[i].bandwidth_mbps = 100.0 + double(i);
  }
  auto f = featurize_window(win);
  REQUIRE(f.size() == kWindowLen * kSnapshotFeatures);
  CHECK(f[0] == 0.0);
  CHECK(f[4] == 100.0);
  CHECK(f[5] == 1.0);
  CHECK(f[9 * 5 + 4] == 109.0);
}

TEST_CASE("generators are deterministic, balanced, and rule-labeled") {
  Dataset a = generate_stage1_dataset(2000, 42);
  Dataset b = generate_stage1_dataset(2000, 42);
  CHECK(a.to_csv() == b.to_csv());
  CHECK(a.size() == 2000);
  size_t pos = 0;
  for (const auto& row : a.s1) {
    CHECK(row.label == (intensive_by_rule(row.task.type, row.task.magnitude) ? 1 : 0));
    pos += size_t(row.label);
  }
  CHECK(pos >= 2000 * 45 / 100);
  CHECK(pos <= 2000 * 55 / 100);

  Dataset c = generate_stage1_dataset(2000, 43);
  CHECK_FALSE(a.to_csv() == c.to_csv());

  Dataset s2 = generate_stage2_dataset(800, 7);
  CHECK(s2.size() == 800);
  CHECK(s2.to_csv() == generate_stage2_dataset(800, 7).to_csv());
  size_t off = 0;
  for (const auto& w : s2.s2) {
    CHECK(w.label == (offload_by_rule(w) ? 1 : 0));
    off += size_t(w.label);
  }
  CHECK(off >= 800 * 45 / 100);
  CHECK(off <= 800 * 55 / 100);
}

TEST_CASE("label noise flips a fraction of labels") {
  Dataset clean = generate_stage1_dataset(1000, 5, 0.0);
  Dataset noisy = generate_stage1_dataset(1000, 5, 0.1);
  size_t flips = 0;
  for (size_t i = 0; i < 1000; i++)
    if (clean.s1[i].label != noisy.s1[i].label) flips++;
  CHECK(flips > 50);
  CHECK(flips < 150);
}

TEST_CASE("csv roundtrip preserves every row") {
  Dataset a = generate_stage1_dataset(150, 9);
  Dataset back = Dataset::from_csv(DatasetKind::Stage1, a.to_csv());
  CHECK(back.to_csv() == a.to_csv());

  Dataset s2 = generate_stage2_dataset(40, 3);
  Dataset back2 = Dataset::from_csv(DatasetKind::Stage2, s2.to_csv());
  CHECK(back2.to_csv() == s2.to_csv());

  CHECK_THROWS_AS(Dataset::from_csv(DatasetKind::Stage1, "bad header\n1,2\n"), Error);
  CHECK_THROWS_AS(Dataset::from_csv(DatasetKind::Stage1,
                                    "task_type,input_magnitude,user_pref,label\n"
                                    "calc_add,notanumber,local,0\n"),
                  Error);
}

TEST_CASE("csv kind sniffing") {
  Dataset s1 = generate_stage1_dataset(5, 1);
  Dataset s2 = generate_stage2_dataset(5, 1);
  CHECK(sniff_csv_kind(s1.to_csv()) == DatasetKind::Stage1);
  CHECK(sniff_csv_kind(s2.to_csv()) == DatasetKind::Stage2);
  CHECK_THROWS_AS(sniff_csv_kind("x,y\n1,2\n"), Error);
}

TEST_CASE("split_dataset is disjoint, exhaustive, and sized by floor") {
  Dataset d = generate_stage1_dataset(101, 13);
  SplitPair p = split_dataset(d, 0.25, 99);
  CHECK(p.first.size() == 25);  // floor(0.25 * 101)
  CHECK(p.second.size() == 76);
  auto all = row_set(d);
  auto merged = row_set(p.first);
  for (const auto& r : row_set(p.second)) merged.insert(r);
  CHECK(merged == all);
  SplitPair q = split_dataset(d, 0.25, 99);
  CHECK(q.first.to_csv() == p.first.to_csv());
  SplitPair full = split_dataset(d, 1.0, 5);
  CHECK(full.first.size() == 101);
  CHECK(full.second.size() == 0);
}

TEST_CASE("train_test_split is 80/20 by floor") {
  Dataset d = generate_stage2_dataset(53, 4);
  SplitPair p = train_test_split(d, 8);
  CHECK(p.first.size() == 42);  // floor(0.8 * 53)
  CHECK(p.second.size() == 11);
  auto all = row_set(d);
  auto merged = row_set(p.first);
  for (const auto& r : row_set(p.second)) merged.insert(r);
  CHECK(merged == all);
}

TEST_CASE("to_examples lowers rows to feature vectors") {
  Dataset s1 = generate_stage1_dataset(20, 2);
  Examples e1 = s1.to_examples();
  CHECK(e1.width == kStage1Features);
  CHECK(e1.count() == 20);
  CHECK(e1.y[0] == s1.s1[0].label);

  Dataset s2 = generate_stage2_dataset(10, 2);
  Examples e2 = s2.to_examples();
  CHECK(e2.width == kWindowLen * kSnapshotFeatures);
  CHECK(e2.count() == 10);
}

TEST_CASE("append concatenates compatible datasets") {
  Dataset a = generate_stage1_dataset(10, 1);
  Dataset b = generate_stage1_dataset(7, 2);
  a.append(b);
  CHECK(a.size() == 17);
  Dataset s2 = generate_stage2_dataset(3, 1);
  CHECK_THROWS_AS(a.append(s2), Error);
}

TEST_SUITE_END();
