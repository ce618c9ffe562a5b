#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "floff/util.hpp"

namespace floff {

enum class QueueMode : uint8_t { MM1 = 1, Deterministic = 2 };

QueueMode queue_mode_from_name(const std::string& name);
const char* queue_mode_name(QueueMode m);

struct SimConfig {
  int users = 100;
  double link_mbps = 1000.0;       // transmission pricing for task bits
  double task_bits_min = 10000.0;  // uniform task size range
  double task_bits_max = 50000.0;
  double per_user_rate = 9.5e-5;    // arrivals per second contributed per user
  double service_rate = 1.0 / 3.0;  // edge service rate (tasks/s)
  QueueMode mode = QueueMode::MM1;
  double power_w = 5.0;
  uint64_t seed = 1;
  size_t samples = 200000;  // simulated tasks, >= 10000
};

struct SimResult {
  int users = 0;
  double avg_response_s = 0.0;
  double avg_energy_j = 0.0;  // power × avg_response, exact
  double utilization = 0.0;
  size_t samples = 0;
};

// Single-queue Monte Carlo (Lindley recursion): response = transmission +
// waiting + service. The arrival stream is a scaled unit-exponential stream,
// so runs with the same seed are pathwise comparable across user counts.
// Unstable configurations (arrival rate >= service rate) are rejected.
SimResult simulate(const SimConfig& cfg);

// closed-form M/M/1 mean sojourn + mean transmission, for oracle checks
double mm1_expected_response_s(const SimConfig& cfg);

// calibrated preset whose outputs land in the documented response/energy
// bands over 100..1000 users
SimConfig paper_shape_preset(int users, uint64_t seed);

std::string sim_csv(const std::vector<SimResult>& rows);

}  // namespace floff
