#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "floff/dataset.hpp"
#include "floff/fernet.hpp"
#include "floff/model.hpp"
#include "floff/net.hpp"
#include "floff/nn.hpp"
#include "floff/protocol.hpp"

namespace floff {

// Per-phase wall-clock seconds. train/total are always derived through
// train_s()/total_s() so the reported identities are bit-exact.
struct TimingReport {
  double init_s = 0;
  double tr_s = 0;
  double loc_s = 0;
  double exm_s = 0;
  double ser_s = 0;
  double agg_s = 0;
  double crypt_s = 0;

  double train_s() const { return init_s + tr_s + loc_s + exm_s + ser_s + agg_s; }
  double total_s() const { return train_s() + crypt_s; }
};

// validates nonnegative components, returns train + crypt
double total_time(const TimingReport& t);

struct EnergyReport {
  double power_w = 5.0;
  double total_j = 0.0;
};

inline double energy_joules(double power_w, double seconds) {
  if (power_w < 0 || seconds < 0)
    throw Error(Err::invalid_argument, "power and time must be nonnegative");
  return power_w * seconds;
}

struct RoundRecord {
  int index = 0;                          // 1-based
  std::vector<uint32_t> participant_ids;  // clients selected at round start, sorted
  size_t received_model_count = 0;        // weight uploads that actually arrived
  size_t aggregate_count = 0;             // averaging divisor (clients [+ server model])
  uint64_t aggregated_digest = 0;
  double wall_time_s = 0;
  std::optional<double> accuracy;  // pooled-data candidate metrics (data-offload runs)
  std::optional<double> loss;
};

struct FLServerOptions {
  std::string endpoint = "127.0.0.1:0";
  int rounds = 10;
  double participant_fraction = 1.0;
  int expected_clients = 4;
  double accept_timeout_s = 60.0;
  double round_timeout_s = 300.0;
  uint64_t seed = 0;  // participant selection
  ArchSpec arch;      // used when no initial weights are given
  uint64_t init_seed = 1;
  std::optional<ModelWeights> init;
  double power_w = 5.0;
  std::string model_out;  // persist the final global model when nonempty

  // data-offload mode: when local_fraction < 1 every client is expected to
  // deliver exactly one encrypted shard before round 1, and the server
  // trains its own candidate on the pooled shards each round.
  bool fedoff = false;
  double local_fraction = 1.0;
  std::string keys_dir;  // *.key files tried in sorted filename order
  TrainConfig server_train;
  uint64_t server_seed = 0;

  std::function<void(uint16_t)> on_listening;  // reports the bound port
};

struct ServerRunResult {
  ModelWeights final_model;
  std::vector<RoundRecord> rounds;
  TimingReport timing;
  EnergyReport energy;
  uint64_t final_digest = 0;
};

struct FLClientOptions {
  std::string endpoint;
  TrainConfig train;
  uint64_t seed = 0;
  double power_w = 5.0;
  double timeout_s = 600.0;
  std::string model_out;  // persist the retained model when nonempty

  // data-offload mode: split off (1 - local_fraction) of the dataset,
  // encrypt it with `key`, and send it once before the first round.
  bool fedoff = false;
  double local_fraction = 1.0;
  std::string key;  // 44-char encoded key; required when a shard is sent
};

struct ClientRoundRecord {
  int index = 0;
  double accuracy = 0;
  double loss = 0;
};

struct ClientRunResult {
  uint32_t client_id = 0;
  ModelWeights retained_model;  // best by test accuracy, else last trained
  double best_accuracy = 0;
  std::vector<ClientRoundRecord> rounds;
  TimingReport timing;
  EnergyReport energy;
};

// pick max(floor(fraction*|ids|), 1) ids uniformly without replacement
std::vector<uint32_t> select_participants(const std::vector<uint32_t>& ids,
                                          double fraction, uint64_t round_seed);

ServerRunResult fl_server_run(const FLServerOptions& opts);
ClientRunResult fl_client_run(const Dataset& data, const FLClientOptions& opts);

}  // namespace floff
