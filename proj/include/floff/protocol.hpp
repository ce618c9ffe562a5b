#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>

#include "floff/dataset.hpp"
#include "floff/net.hpp"

namespace floff {

// WELCOME carries the assigned client id
Bytes encode_welcome(uint32_t client_id);
uint32_t decode_welcome(std::span<const uint8_t> payload);

// DATA_SHARD: [4-byte BE client id][4-byte BE token length][token bytes]
Bytes encode_data_shard(uint32_t client_id, const std::string& token);
struct DataShard {
  uint32_t client_id = 0;
  std::string token;
};
DataShard decode_data_shard(std::span<const uint8_t> payload);

Bytes encode_error_text(const std::string& text);
std::string decode_error_text(std::span<const uint8_t> payload);

// TaskRequest: [1-byte task type][8-byte BE request id][type-specific ints]
//   calculator: [8-byte BE a][8-byte BE b] (two's complement)
//   matmul:     [4-byte BE order][8-byte BE seed a][8-byte BE seed b]
//   file:       [4-byte BE size][8-byte BE content seed]
//   sort:       [4-byte BE count][8-byte BE seed]
//   search:     [4-byte BE count][8-byte BE seed][8-byte BE needle]
struct CalculatorArgs {
  int64_t a = 0, b = 0;
};
struct MatMulArgs {
  uint32_t order = 0;
  uint64_t seed_a = 0, seed_b = 0;
};
struct FileCreateArgs {
  uint32_t size_bytes = 0;
  uint64_t content_seed = 0;
};
struct SortArgs {
  uint32_t count = 0;
  uint64_t seed = 0;
};
struct SearchArgs {
  uint32_t count = 0;
  uint64_t seed = 0;
  int64_t needle = 0;
};

struct TaskRequest {
  TaskType type = TaskType::CalculatorAdd;
  uint64_t request_id = 0;
  std::variant<CalculatorArgs, MatMulArgs, FileCreateArgs, SortArgs, SearchArgs> args;

  uint64_t magnitude() const;
};

Bytes encode_task_request(const TaskRequest& r);
TaskRequest decode_task_request(std::span<const uint8_t> payload);

enum class ExecSite : uint8_t { Device = 0, Edge = 1, Cloud = 2 };
const char* exec_site_name(ExecSite s);

// TaskResult: [8-byte BE digest][1-byte ok][1-byte executed-at][1-byte
// forwarded][result bytes to end]; digest = FNV-1a64(result bytes)
struct TaskResultMsg {
  uint64_t digest = 0;
  bool ok = true;
  ExecSite executed_at = ExecSite::Device;
  bool forwarded = false;
  Bytes result;
};

Bytes encode_task_result(const TaskResultMsg& r);
TaskResultMsg decode_task_result(std::span<const uint8_t> payload);

}  // namespace floff
