#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "floff/decision.hpp"
#include "floff/net.hpp"
#include "floff/protocol.hpp"

namespace floff {

// Calibrated cost model: recorded response times are priced from these
// parameters (per-message latency, link transfer, modeled compute rates) so
// local/offload orderings are reproducible on any hardware. The task kernels
// still run for real to produce verifiable result bytes.
struct CostModel {
  double device_rate = 1.8e6;   // work units per second on the device
  double edge_speed = 1.45;     // edge compute speed, relative to device
  double cloud_speed = 3.0;     // cloud compute speed, relative to device
  double link_mbps = 1000.0;    // link capacity used for transfer pricing
  double msg_latency_s = 0.05;  // one-way per-message latency
  double power_w = 5.0;         // device power draw while waiting
};

struct ExecutionRecord {
  Decision decision;
  ExecSite executed_at = ExecSite::Device;
  bool forwarded = false;
  double response_time_s = 0.0;  // priced under the cost model
  double energy_j = 0.0;         // power × response time, exact
  uint64_t digest = 0;
  bool ok = true;
};

// deterministic matrix material: seed 0 yields the identity, otherwise
// entries are drawn uniformly from 0..9
std::vector<int64_t> task_matrix(uint32_t order, uint64_t seed);
uint64_t int_array_digest(std::span<const int64_t> values);

// Runs the kernel for a request. Task-level failures (division by zero,
// overflow) come back as ok=false results whose bytes carry the message;
// only misuse (e.g. missing sandbox) throws. FileCreate writes exclusively
// under sandbox_dir.
TaskResultMsg execute_task(const TaskRequest& request, ExecSite site,
                           const std::string& sandbox_dir);

double task_work_units_of(const TaskRequest& request);
double priced_local_s(const TaskRequest& request, const CostModel& cost);
// target Edge prices one hop, Cloud prices two (device->edge->cloud)
double priced_offload_s(const TaskRequest& request, const CostModel& cost,
                        ExecSite target);

// Round-trip over the wire protocol; the service's digest field is
// re-verified against the returned bytes. ERROR replies surface as
// Err::runtime, dead endpoints as Err::io/Err::timeout.
TaskResultMsg offload_task(const TaskRequest& request, const std::string& endpoint,
                           double timeout_s = 120.0);

struct ServicePolicy {
  int max_concurrent = 8;
  uint32_t max_matmul_order = 0;  // 0 = no order limit
};

// Edge/cloud task service. The edge executes within its capacity policy and
// otherwise forwards to the configured cloud endpoint, relaying the answer
// with the forwarded flag set. Malformed frames get an ERROR reply and the
// connection stays open.
class TaskService {
 public:
  TaskService(ExecSite site, const std::string& host, uint16_t port,
              ServicePolicy policy, std::string sandbox_dir,
              std::string cloud_endpoint = "");
  ~TaskService();
  TaskService(const TaskService&) = delete;
  TaskService& operator=(const TaskService&) = delete;

  void start();
  void stop();
  uint16_t port() const { return port_; }

 private:
  void accept_loop();
  void serve_connection(Socket sock);
  TaskResultMsg handle_request(const TaskRequest& request);

  ExecSite site_;
  std::string host_;
  uint16_t port_;
  ServicePolicy policy_;
  std::string sandbox_dir_;
  std::string cloud_endpoint_;
  std::unique_ptr<Listener> listener_;
  std::thread accept_thread_;
  std::vector<std::thread> workers_;
  std::mutex workers_mu_;
  std::set<Socket*> conns_;  // live connections, for shutdown on stop
  std::mutex conns_mu_;
  std::atomic<bool> running_{false};
  std::atomic<int> active_{0};
};

struct CostRow {
  std::string task_name;
  uint64_t magnitude = 0;
  double local_s = 0.0;
  double local_j = 0.0;
  double offload_s = 0.0;
  double offload_j = 0.0;
  bool offload_cheaper = false;
  double savings_fraction = 0.0;  // 1 - cheaper/dearer, signed toward offload
  uint64_t digest = 0;
};

// Executes the request both locally and via the endpoint (digests must
// agree), then prices both modes under the cost model.
CostRow compare_costs(const TaskRequest& request, const CostModel& cost,
                      const std::string& endpoint, const std::string& sandbox_dir,
                      double timeout_s = 120.0);

// Executes a request along the routed path and prices the record. endpoint_edge
// serves OffloadEdge, endpoint_cloud serves OffloadCloud; either may be empty
// when the verdict does not need it.
ExecutionRecord execute_routed(const TaskRequest& request, const Decision& decision,
                               const CostModel& cost, const std::string& sandbox_dir,
                               const std::string& endpoint_edge,
                               const std::string& endpoint_cloud,
                               double timeout_s = 120.0);

}  // namespace floff
