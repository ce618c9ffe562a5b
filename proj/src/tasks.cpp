#include "floff/tasks.hpp"

#include <algorithm>
#include <filesystem>

namespace floff {

namespace {

struct ActiveGuard {
  std::atomic<int>& counter;
  explicit ActiveGuard(std::atomic<int>& c) : counter(c) { ++counter; }
  ~ActiveGuard() { --counter; }
};

Bytes be_bytes_of(std::span<const int64_t> values) {
  ByteWriter w;
  for (int64_t v : values) w.i64be(v);
  return std::move(w).take();
}

TaskResultMsg fail_result(ExecSite site, const std::string& message) {
  TaskResultMsg r;
  r.ok = false;
  r.executed_at = site;
  r.result.assign(message.begin(), message.end());
  r.digest = fnv1a64(r.result);
  return r;
}

TaskResultMsg ok_result(ExecSite site, Bytes bytes) {
  TaskResultMsg r;
  r.ok = true;
  r.executed_at = site;
  r.result = std::move(bytes);
  r.digest = fnv1a64(r.result);
  return r;
}

Bytes text_bytes(const std::string& s) { return Bytes(s.begin(), s.end()); }

}  // namespace

std::vector<int64_t> task_matrix(uint32_t order, uint64_t seed) {
  std::vector<int64_t> m(static_cast<size_t>(order) * order, 0);
  if (seed == 0) {
    for (uint32_t i = 0; i < order; ++i) m[static_cast<size_t>(i) * order + i] = 1;
    return m;
  }
  Rng rng(seed);
  for (auto& v : m) v = static_cast<int64_t>(rng.below(10));
  return m;
}

uint64_t int_array_digest(std::span<const int64_t> values) {
  return fnv1a64(be_bytes_of(values));
}

TaskResultMsg execute_task(const TaskRequest& request, ExecSite site,
                           const std::string& sandbox_dir) {
  switch (request.type) {
    case TaskType::CalculatorAdd:
    case TaskType::CalculatorSub:
    case TaskType::CalculatorMul: {
      const auto& a = std::get<CalculatorArgs>(request.args);
      int64_t out = 0;
      bool overflow = false;
      switch (request.type) {
        case TaskType::CalculatorAdd:
          overflow = __builtin_add_overflow(a.a, a.b, &out);
          break;
        case TaskType::CalculatorSub:
          overflow = __builtin_sub_overflow(a.a, a.b, &out);
          break;
        default:
          overflow = __builtin_mul_overflow(a.a, a.b, &out);
          break;
      }
      if (overflow) return fail_result(site, "integer overflow");
      return ok_result(site, text_bytes(std::to_string(out)));
    }
    case TaskType::CalculatorDiv: {
      const auto& a = std::get<CalculatorArgs>(request.args);
      if (a.b == 0) return fail_result(site, "division by zero");
      double q = static_cast<double>(a.a) / static_cast<double>(a.b);
      return ok_result(site, text_bytes(format_double(q)));
    }
    case TaskType::MatrixMultiply: {
      const auto& a = std::get<MatMulArgs>(request.args);
      const uint32_t n = a.order;
      auto ma = task_matrix(n, a.seed_a);
      auto mb = task_matrix(n, a.seed_b);
      std::vector<int64_t> prod(static_cast<size_t>(n) * n, 0);
      for (uint32_t i = 0; i < n; ++i)
        for (uint32_t j = 0; j < n; ++j) {
          int64_t acc = 0;
          for (uint32_t k = 0; k < n; ++k)
            acc += ma[static_cast<size_t>(i) * n + k] * mb[static_cast<size_t>(k) * n + j];
          prod[static_cast<size_t>(i) * n + j] = acc;
        }
      ByteWriter w;
      w.u64be(int_array_digest(prod));
      w.u32be(n);
      return ok_result(site, std::move(w).take());
    }
    case TaskType::FileCreate: {
      const auto& a = std::get<FileCreateArgs>(request.args);
      if (sandbox_dir.empty())
        throw Error(Err::invalid_argument, "file tasks need a sandbox directory");
      Bytes content(a.size_bytes);
      Rng rng(a.content_seed);
      size_t i = 0;
      while (i + 8 <= content.size()) {
        uint64_t v = rng.u64();
        for (int b = 7; b >= 0; --b) content[i++] = static_cast<uint8_t>(v >> (8 * b));
      }
      if (i < content.size()) {
        uint64_t v = rng.u64();
        for (int b = 7; i < content.size(); --b)
          content[i++] = static_cast<uint8_t>(v >> (8 * b));
      }
      std::error_code ec;
      std::filesystem::create_directories(sandbox_dir, ec);
      auto path = std::filesystem::path(sandbox_dir) /
                  ("task_" + to_hex_u64(request.request_id) + ".bin");
      try {
        write_file(path.string(), content);
      } catch (const Error&) {
        return fail_result(site, std::string("file write failed: ") + path.string());
      }
      ByteWriter w;
      w.u64be(fnv1a64(content));
      w.u32be(a.size_bytes);
      return ok_result(site, std::move(w).take());
    }
    case TaskType::Sort: {
      const auto& a = std::get<SortArgs>(request.args);
      Rng rng(a.seed);
      std::vector<int64_t> values(a.count);
      for (auto& v : values) v = static_cast<int64_t>(rng.u64());
      std::sort(values.begin(), values.end());
      ByteWriter w;
      w.u64be(int_array_digest(values));
      w.u32be(a.count);
      return ok_result(site, std::move(w).take());
    }
    case TaskType::Search: {
      const auto& a = std::get<SearchArgs>(request.args);
      Rng rng(a.seed);
      uint64_t found = UINT64_MAX;
      for (uint32_t i = 0; i < a.count; ++i) {
        auto v = static_cast<int64_t>(rng.below(1000000));
        if (found == UINT64_MAX && v == a.needle) found = i;
      }
      ByteWriter w;
      w.u64be(found);
      return ok_result(site, std::move(w).take());
    }
  }
  throw Error(Err::invalid_argument, "unknown task type");
}

double task_work_units_of(const TaskRequest& request) {
  return task_work_units(request.type, request.magnitude());
}

double priced_local_s(const TaskRequest& request, const CostModel& cost) {
  return task_work_units_of(request) / cost.device_rate;
}

double priced_offload_s(const TaskRequest& request, const CostModel& cost,
                        ExecSite target) {
  if (target == ExecSite::Device)
    throw Error(Err::invalid_argument, "offload target must be edge or cloud");
  int hops = target == ExecSite::Edge ? 1 : 2;
  double speed = target == ExecSite::Edge ? cost.edge_speed : cost.cloud_speed;
  constexpr double kResponseFrameBytes = 32.0;  // notional result frame
  double frame_bytes =
      static_cast<double>(encode_task_request(request).size()) + 5.0 + kResponseFrameBytes;
  double transfer = frame_bytes * 8.0 / (cost.link_mbps * 1e6);
  return 2.0 * hops * cost.msg_latency_s + transfer +
         task_work_units_of(request) / (cost.device_rate * speed);
}

TaskResultMsg offload_task(const TaskRequest& request, const std::string& endpoint,
                           double timeout_s) {
  auto [host, port] = parse_endpoint(endpoint);
  Socket sock = tcp_connect(host, port, std::min(timeout_s, 10.0));
  sock.set_send_timeout(timeout_s);
  sock.set_recv_timeout(timeout_s);
  sock.send_msg(MsgType::TaskRequest, encode_task_request(request));
  Message reply = sock.recv_msg();
  if (reply.type == MsgType::Error)
    throw Error(Err::runtime, "service error: " + decode_error_text(reply.payload));
  if (reply.type != MsgType::TaskResult)
    throw Error(Err::protocol, "unexpected reply type to task request");
  return decode_task_result(reply.payload);
}

TaskService::TaskService(ExecSite site, const std::string& host, uint16_t port,
                         ServicePolicy policy, std::string sandbox_dir,
                         std::string cloud_endpoint)
    : site_(site),
      host_(host),
      port_(port),
      policy_(policy),
      sandbox_dir_(std::move(sandbox_dir)),
      cloud_endpoint_(std::move(cloud_endpoint)) {
  if (site_ != ExecSite::Edge && site_ != ExecSite::Cloud)
    throw Error(Err::invalid_argument, "service site must be edge or cloud");
}

TaskService::~TaskService() { stop(); }

void TaskService::start() {
  if (running_) return;
  listener_ = std::make_unique<Listener>(host_, port_);
  port_ = listener_->bound_port();
  running_ = true;
  accept_thread_ = std::thread([this] { accept_loop(); });
}

void TaskService::stop() {
  if (!running_) return;
  running_ = false;
  listener_->close();
  if (accept_thread_.joinable()) accept_thread_.join();
  {
    // unblock workers parked in recv on connections the peer keeps open
    std::lock_guard lk(conns_mu_);
    for (Socket* s : conns_) s->shutdown_both();
  }
  std::vector<std::thread> workers;
  {
    std::lock_guard lk(workers_mu_);
    workers.swap(workers_);
  }
  for (auto& t : workers)
    if (t.joinable()) t.join();
  listener_.reset();
}

void TaskService::accept_loop() {
  while (running_) {
    Socket sock;
    try {
      sock = listener_->accept_one(0.25);
    } catch (const Error& e) {
      if (e.code() == Err::timeout) continue;
      break;  // listener closed
    }
    std::lock_guard lk(workers_mu_);
    workers_.emplace_back(
        [this](Socket s) { serve_connection(std::move(s)); }, std::move(sock));
  }
}

void TaskService::serve_connection(Socket sock) {
  {
    std::lock_guard lk(conns_mu_);
    conns_.insert(&sock);
  }
  struct Deregister {
    TaskService* svc;
    Socket* s;
    ~Deregister() {
      std::lock_guard lk(svc->conns_mu_);
      svc->conns_.erase(s);
    }
  } dereg{this, &sock};
  while (running_) {
    Message m;
    try {
      m = sock.recv_msg();
    } catch (const Error&) {
      return;  // closed, truncated mid-frame, or oversized — drop connection
    }
    try {
      if (m.type != MsgType::TaskRequest) {
        sock.send_msg(MsgType::Error, encode_error_text("unexpected message type"));
        continue;
      }
      TaskRequest req;
      try {
        req = decode_task_request(m.payload);
      } catch (const Error& e) {
        sock.send_msg(MsgType::Error, encode_error_text(e.what()));
        continue;
      }
      TaskResultMsg res;
      try {
        res = handle_request(req);
      } catch (const Error& e) {
        sock.send_msg(MsgType::Error, encode_error_text(e.what()));
        continue;
      }
      sock.send_msg(MsgType::TaskResult, encode_task_result(res));
    } catch (const Error&) {
      return;  // send failed — peer gone
    }
  }
}

TaskResultMsg TaskService::handle_request(const TaskRequest& request) {
  ActiveGuard guard(active_);
  if (site_ == ExecSite::Edge) {
    bool over_capacity = active_ > policy_.max_concurrent;
    bool over_order = policy_.max_matmul_order != 0 &&
                      request.type == TaskType::MatrixMultiply &&
                      std::get<MatMulArgs>(request.args).order > policy_.max_matmul_order;
    if (over_capacity || over_order) {
      if (cloud_endpoint_.empty())
        throw Error(Err::runtime, "capacity exceeded and no cloud endpoint configured");
      TaskResultMsg relayed;
      try {
        relayed = offload_task(request, cloud_endpoint_);
      } catch (const Error& e) {
        throw Error(Err::runtime, std::string("cloud forward failed: ") + e.what());
      }
      relayed.forwarded = true;
      relayed.digest = fnv1a64(relayed.result);
      return relayed;
    }
  }
  return execute_task(request, site_, sandbox_dir_);
}

CostRow compare_costs(const TaskRequest& request, const CostModel& cost,
                      const std::string& endpoint, const std::string& sandbox_dir,
                      double timeout_s) {
  TaskResultMsg local = execute_task(request, ExecSite::Device, sandbox_dir);
  TaskResultMsg remote = offload_task(request, endpoint, timeout_s);
  if (local.ok != remote.ok || local.digest != remote.digest)
    throw Error(Err::runtime, "local and offloaded executions disagree");
  ExecSite target = remote.executed_at == ExecSite::Device ? ExecSite::Edge
                                                           : remote.executed_at;
  CostRow row;
  row.task_name = task_type_name(request.type);
  row.magnitude = request.magnitude();
  row.local_s = priced_local_s(request, cost);
  row.offload_s = priced_offload_s(request, cost, target);
  row.local_j = cost.power_w * row.local_s;
  row.offload_j = cost.power_w * row.offload_s;
  row.offload_cheaper = row.offload_s < row.local_s;
  row.savings_fraction = row.offload_cheaper ? 1.0 - row.offload_s / row.local_s
                                             : 1.0 - row.local_s / row.offload_s;
  row.digest = local.digest;
  return row;
}

ExecutionRecord execute_routed(const TaskRequest& request, const Decision& decision,
                               const CostModel& cost, const std::string& sandbox_dir,
                               const std::string& endpoint_edge,
                               const std::string& endpoint_cloud, double timeout_s) {
  ExecutionRecord rec;
  rec.decision = decision;
  TaskResultMsg res;
  switch (decision.verdict) {
    case Verdict::LocalExecute:
      res = execute_task(request, ExecSite::Device, sandbox_dir);
      rec.response_time_s = priced_local_s(request, cost);
      break;
    case Verdict::OffloadEdge: {
      res = offload_task(request, endpoint_edge, timeout_s);
      // the edge may have declined and forwarded to the cloud
      ExecSite where = res.forwarded ? ExecSite::Cloud : res.executed_at;
      rec.response_time_s = priced_offload_s(request, cost, where);
      break;
    }
    case Verdict::OffloadCloud:
      res = offload_task(request, endpoint_cloud, timeout_s);
      rec.response_time_s = priced_offload_s(request, cost, ExecSite::Cloud);
      break;
  }
  rec.executed_at = res.executed_at;
  rec.forwarded = res.forwarded;
  rec.digest = res.digest;
  rec.ok = res.ok;
  rec.energy_j = cost.power_w * rec.response_time_s;
  return rec;
}

}  // namespace floff
