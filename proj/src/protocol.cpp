#include "floff/protocol.hpp"

#include <cmath>

namespace floff {

Bytes encode_welcome(uint32_t client_id) {
  ByteWriter w;
  w.u32be(client_id);
  return std::move(w).take();
}

uint32_t decode_welcome(std::span<const uint8_t> payload) {
  ByteReader r(payload);
  uint32_t id = r.u32be();
  if (!r.done()) throw Error(Err::protocol, "welcome payload has trailing bytes");
  return id;
}

Bytes encode_data_shard(uint32_t client_id, const std::string& token) {
  ByteWriter w;
  w.u32be(client_id);
  w.u32be(static_cast<uint32_t>(token.size()));
  w.str(token);
  return std::move(w).take();
}

DataShard decode_data_shard(std::span<const uint8_t> payload) {
  ByteReader r(payload);
  DataShard s;
  s.client_id = r.u32be();
  uint32_t n = r.u32be();
  auto raw = r.raw(n);
  s.token.assign(raw.begin(), raw.end());
  if (!r.done()) throw Error(Err::protocol, "data shard payload has trailing bytes");
  return s;
}

Bytes encode_error_text(const std::string& text) {
  return Bytes(text.begin(), text.end());
}

std::string decode_error_text(std::span<const uint8_t> payload) {
  return std::string(payload.begin(), payload.end());
}

uint64_t TaskRequest::magnitude() const {
  switch (type) {
    case TaskType::CalculatorAdd:
    case TaskType::CalculatorSub:
    case TaskType::CalculatorMul:
    case TaskType::CalculatorDiv: {
      const auto& c = std::get<CalculatorArgs>(args);
      auto digits = [](int64_t v) {
        uint64_t m = v < 0 ? -static_cast<uint64_t>(v) : static_cast<uint64_t>(v);
        uint64_t d = 1;
        while (m >= 10) {
          m /= 10;
          ++d;
        }
        return d;
      };
      return std::max(digits(c.a), digits(c.b));
    }
    case TaskType::MatrixMultiply:
      return std::get<MatMulArgs>(args).order;
    case TaskType::FileCreate:
      return std::get<FileCreateArgs>(args).size_bytes;
    case TaskType::Sort:
      return std::get<SortArgs>(args).count;
    case TaskType::Search:
      return std::get<SearchArgs>(args).count;
  }
  throw Error(Err::invalid_argument, "unknown task type");
}

Bytes encode_task_request(const TaskRequest& r) {
  ByteWriter w;
  w.u8(static_cast<uint8_t>(r.type));
  w.u64be(r.request_id);
  switch (r.type) {
    case TaskType::CalculatorAdd:
    case TaskType::CalculatorSub:
    case TaskType::CalculatorMul:
    case TaskType::CalculatorDiv: {
      const auto& a = std::get<CalculatorArgs>(r.args);
      w.i64be(a.a);
      w.i64be(a.b);
      break;
    }
    case TaskType::MatrixMultiply: {
      const auto& a = std::get<MatMulArgs>(r.args);
      w.u32be(a.order);
      w.u64be(a.seed_a);
      w.u64be(a.seed_b);
      break;
    }
    case TaskType::FileCreate: {
      const auto& a = std::get<FileCreateArgs>(r.args);
      w.u32be(a.size_bytes);
      w.u64be(a.content_seed);
      break;
    }
    case TaskType::Sort: {
      const auto& a = std::get<SortArgs>(r.args);
      w.u32be(a.count);
      w.u64be(a.seed);
      break;
    }
    case TaskType::Search: {
      const auto& a = std::get<SearchArgs>(r.args);
      w.u32be(a.count);
      w.u64be(a.seed);
      w.i64be(a.needle);
      break;
    }
  }
  return std::move(w).take();
}

TaskRequest decode_task_request(std::span<const uint8_t> payload) {
  ByteReader r(payload);
  TaskRequest req;
  uint8_t t = r.u8();
  if (t < 1 || t > kTaskTypeCount) throw Error(Err::protocol, "unknown task type byte");
  req.type = static_cast<TaskType>(t);
  req.request_id = r.u64be();
  switch (req.type) {
    case TaskType::CalculatorAdd:
    case TaskType::CalculatorSub:
    case TaskType::CalculatorMul:
    case TaskType::CalculatorDiv: {
      CalculatorArgs a;
      a.a = r.i64be();
      a.b = r.i64be();
      req.args = a;
      break;
    }
    case TaskType::MatrixMultiply: {
      MatMulArgs a;
      a.order = r.u32be();
      a.seed_a = r.u64be();
      a.seed_b = r.u64be();
      if (a.order == 0) throw Error(Err::protocol, "matmul order must be positive");
      req.args = a;
      break;
    }
    case TaskType::FileCreate: {
      FileCreateArgs a;
      a.size_bytes = r.u32be();
      a.content_seed = r.u64be();
      req.args = a;
      break;
    }
    case TaskType::Sort: {
      SortArgs a;
      a.count = r.u32be();
      a.seed = r.u64be();
      req.args = a;
      break;
    }
    case TaskType::Search: {
      SearchArgs a;
      a.count = r.u32be();
      a.seed = r.u64be();
      a.needle = r.i64be();
      req.args = a;
      break;
    }
  }
  if (!r.done()) throw Error(Err::protocol, "task request has trailing bytes");
  return req;
}

const char* exec_site_name(ExecSite s) {
  switch (s) {
    case ExecSite::Device: return "device";
    case ExecSite::Edge: return "edge";
    case ExecSite::Cloud: return "cloud";
  }
  return "?";
}

Bytes encode_task_result(const TaskResultMsg& r) {
  ByteWriter w;
  w.u64be(r.digest);
  w.u8(r.ok ? 1 : 0);
  w.u8(static_cast<uint8_t>(r.executed_at));
  w.u8(r.forwarded ? 1 : 0);
  w.raw(r.result);
  return std::move(w).take();
}

TaskResultMsg decode_task_result(std::span<const uint8_t> payload) {
  ByteReader r(payload);
  TaskResultMsg m;
  m.digest = r.u64be();
  m.ok = r.u8() != 0;
  uint8_t site = r.u8();
  if (site > 2) throw Error(Err::protocol, "unknown execution site");
  m.executed_at = static_cast<ExecSite>(site);
  m.forwarded = r.u8() != 0;
  auto rest = r.raw(r.remaining());
  m.result.assign(rest.begin(), rest.end());
  if (m.digest != fnv1a64(m.result))
    throw Error(Err::protocol, "result digest mismatch");
  return m;
}

}  // namespace floff
