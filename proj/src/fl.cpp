#include "floff/fl.hpp"

#include <algorithm>
#include <filesystem>

namespace floff {

namespace {

// accumulates wall time into a phase slot on scope exit
struct PhaseAcc {
  double& slot;
  double t0;
  explicit PhaseAcc(double& s) : slot(s), t0(now_monotonic_s()) {}
  ~PhaseAcc() { slot += now_monotonic_s() - t0; }
};

struct Session {
  uint32_t id = 0;
  Socket sock;
  bool alive = true;
};

void mark_dead(Session& s) {
  if (!s.alive) return;
  s.alive = false;
  s.sock.shutdown_both();
}

std::vector<std::string> load_keys(const std::string& dir) {
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  std::error_code ec;
  for (const auto& e : fs::directory_iterator(dir, ec))
    if (e.is_regular_file() && e.path().extension() == ".key") files.push_back(e.path());
  if (ec) throw Error(Err::io, "cannot list key directory: " + dir);
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
  std::vector<std::string> keys;
  for (const auto& f : files) {
    auto raw = read_file(f.string());
    std::string key(raw.begin(), raw.end());
    while (!key.empty() && (key.back() == '\n' || key.back() == '\r' || key.back() == ' '))
      key.pop_back();
    try {
      fernet_validate_key(key);
    } catch (const Error&) {
      throw Error(Err::invalid_argument, "not a valid key file: " + f.string());
    }
    keys.push_back(key);
  }
  if (keys.empty()) throw Error(Err::invalid_argument, "no .key files in " + dir);
  return keys;
}

// strict-improvement watermark; falls back to the last candidate when no
// round ever improved on the initial 0 accuracy
struct KeepBest {
  double best_accuracy = 0.0;
  bool improved = false;
  ModelWeights best;
  ModelWeights last;

  void offer(const ModelWeights& w, double accuracy) {
    last = w;
    if (accuracy > best_accuracy) {
      best_accuracy = accuracy;
      best = w;
      improved = true;
    }
  }
  const ModelWeights& retained() const { return improved ? best : last; }
};

}  // namespace

double total_time(const TimingReport& t) {
  for (double v : {t.init_s, t.tr_s, t.loc_s, t.exm_s, t.ser_s, t.agg_s, t.crypt_s})
    if (v < 0 || !std::isfinite(v))
      throw Error(Err::invalid_argument, "timing components must be nonnegative");
  return t.total_s();
}

std::vector<uint32_t> select_participants(const std::vector<uint32_t>& ids,
                                          double fraction, uint64_t round_seed) {
  if (ids.empty()) throw Error(Err::invalid_argument, "no participants to select from");
  if (!(fraction > 0.0) || fraction > 1.0)
    throw Error(Err::invalid_argument, "participant fraction must be in (0,1]");
  auto k = static_cast<size_t>(fraction * static_cast<double>(ids.size()));
  if (k < 1) k = 1;
  if (k > ids.size()) k = ids.size();
  std::vector<uint32_t> pool = ids;
  Rng rng(round_seed);
  rng.shuffle(pool);
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

ServerRunResult fl_server_run(const FLServerOptions& opts) {
  if (opts.rounds < 1) throw Error(Err::invalid_argument, "rounds must be >= 1");
  if (opts.expected_clients < 1)
    throw Error(Err::invalid_argument, "expected clients must be >= 1");
  if (!(opts.local_fraction > 0.0) || opts.local_fraction > 1.0)
    throw Error(Err::invalid_argument, "local fraction must be in (0,1]");

  ServerRunResult out;
  TimingReport& tm = out.timing;
  const bool expect_shards = opts.fedoff && opts.local_fraction < 1.0;

  // --- init: bind, accept N clients, build the initial global model
  std::vector<Session> sessions;
  std::optional<Listener> listener;
  ModelWeights global;
  {
    PhaseAcc acc(tm.init_s);
    auto [host, port] = parse_endpoint(opts.endpoint);
    listener.emplace(host, port);
    if (opts.on_listening) opts.on_listening(listener->bound_port());

    if (opts.init) {
      global = *opts.init;
    } else {
      opts.arch.validate();
      global = init_model(opts.arch, opts.init_seed);
    }

    const double deadline = now_monotonic_s() + opts.accept_timeout_s;
    while (sessions.size() < static_cast<size_t>(opts.expected_clients)) {
      double remaining = deadline - now_monotonic_s();
      if (remaining <= 0)
        throw Error(Err::timeout, "accepted " + std::to_string(sessions.size()) + " of " +
                                      std::to_string(opts.expected_clients) +
                                      " clients before the deadline");
      Socket sock;
      try {
        sock = listener->accept_one(std::min(remaining, 0.25));
      } catch (const Error& e) {
        if (e.code() == Err::timeout) continue;
        throw;
      }
      try {
        sock.set_recv_timeout(std::min(5.0, std::max(remaining, 0.1)));
        Message m = sock.recv_msg();
        if (m.type != MsgType::Hello) continue;  // drop; the slot reopens
        auto id = static_cast<uint32_t>(sessions.size());
        sock.send_msg(MsgType::Welcome, encode_welcome(id));
        sock.set_recv_timeout(opts.round_timeout_s);
        sock.set_send_timeout(opts.round_timeout_s);
        sessions.push_back(Session{id, std::move(sock), true});
      } catch (const Error&) {
        // failed handshake: socket dropped, slot reopens
      }
    }
  }

  // --- shard pool (data-offload mode): one encrypted shard per client
  Dataset pooled;
  Examples pool_train, pool_test;
  bool server_has_data = false;
  if (expect_shards) {
    auto keys = load_keys(opts.keys_dir);
    bool first = true;
    for (auto& s : sessions) {
      try {
        Message m;
        {
          PhaseAcc acc(tm.tr_s);
          m = s.sock.recv_msg();
        }
        if (m.type != MsgType::DataShard)
          throw Error(Err::protocol, "expected a data shard");
        auto shard = decode_data_shard(m.payload);
        if (shard.client_id != s.id)
          throw Error(Err::protocol, "shard carries a foreign client id");
        Bytes plain;
        bool decrypted = false;
        {
          PhaseAcc acc(tm.crypt_s);
          for (const auto& key : keys) {
            try {
              plain = fernet_decrypt(key, shard.token, std::nullopt);
              decrypted = true;
              break;
            } catch (const Error&) {
              // wrong key; try the next one
            }
          }
        }
        if (!decrypted) {
          try {
            s.sock.send_msg(MsgType::Error,
                            encode_error_text("shard rejected: authentication failed"));
          } catch (const Error&) {
          }
          mark_dead(s);
          continue;
        }
        PhaseAcc acc(tm.ser_s);
        std::string csv(plain.begin(), plain.end());
        Dataset d = Dataset::from_csv(sniff_csv_kind(csv), csv);
        if (first) {
          pooled.kind = d.kind;
          first = false;
        }
        pooled.append(d);
      } catch (const Error&) {
        mark_dead(s);
      }
    }
    if (std::none_of(sessions.begin(), sessions.end(),
                     [](const Session& s) { return s.alive; }))
      throw Error(Err::runtime, "no clients survived the shard phase");
    PhaseAcc acc(tm.ser_s);
    if (!pooled.empty()) {
      auto split = train_test_split(pooled, opts.server_seed);
      if (!split.first.empty() && !split.second.empty()) {
        pool_train = split.first.to_examples();
        pool_test = split.second.to_examples();
        server_has_data = true;
      }
    }
  }

  // --- rounds
  KeepBest server_keep;
  for (int r = 1; r <= opts.rounds; ++r) {
    const double round_t0 = now_monotonic_s();
    RoundRecord rec;
    rec.index = r;

    std::vector<uint32_t> alive_ids;
    for (const auto& s : sessions)
      if (s.alive) alive_ids.push_back(s.id);
    if (alive_ids.empty()) throw Error(Err::runtime, "no clients remain");

    auto participants = select_participants(alive_ids, opts.participant_fraction,
                                            derive_seed(opts.seed, 0xA11, uint64_t(r)));
    rec.participant_ids = participants;  // who was selected at round start

    Bytes global_bytes;
    {
      PhaseAcc acc(tm.ser_s);
      global_bytes = serialize_weights(global);
    }
    for (uint32_t id : participants) {
      try {
        PhaseAcc acc(tm.tr_s);
        sessions[id].sock.send_msg(MsgType::GlobalWeights, global_bytes);
      } catch (const Error&) {
        mark_dead(sessions[id]);
      }
    }

    std::vector<ModelWeights> models;  // ascending client id
    for (uint32_t id : participants) {
      if (!sessions[id].alive) continue;
      try {
        Message m;
        {
          PhaseAcc acc(tm.tr_s);
          m = sessions[id].sock.recv_msg();
        }
        if (m.type != MsgType::ClientWeights)
          throw Error(Err::protocol, "expected client weights");
        ModelWeights w;
        {
          PhaseAcc acc(tm.ser_s);
          w = deserialize_weights(m.payload);
        }
        if (!(w.spec == global.spec))
          throw Error(Err::protocol,
                      "client " + std::to_string(id) + " sent a mismatched architecture");
        models.push_back(std::move(w));
      } catch (const Error&) {
        mark_dead(sessions[id]);
      }
    }
    if (models.empty())
      throw Error(Err::runtime, "round " + std::to_string(r) + " received no models");
    rec.received_model_count = models.size();

    if (server_has_data) {
      TrainConfig cfg = opts.server_train;
      cfg.seed = derive_seed(opts.server_seed, 0x5EAD, uint64_t(r));
      TrainResult cand;
      {
        PhaseAcc acc(tm.loc_s);
        cand = train(global, pool_train, cfg);
      }
      Metrics met;
      {
        PhaseAcc acc(tm.exm_s);
        met = evaluate(cand.weights, pool_test);
      }
      server_keep.offer(cand.weights, met.accuracy);
      rec.accuracy = met.accuracy;
      rec.loss = met.loss;
      models.push_back(server_keep.retained());
    }

    {
      PhaseAcc acc(tm.agg_s);
      global = aggregate(models);
      global.quantize_f32();
    }
    rec.aggregate_count = models.size();
    rec.aggregated_digest = weights_digest(global);
    rec.wall_time_s = now_monotonic_s() - round_t0;
    out.rounds.push_back(std::move(rec));
  }

  // --- release clients, persist the final model
  for (auto& s : sessions) {
    if (!s.alive) continue;
    try {
      PhaseAcc acc(tm.tr_s);
      s.sock.send_msg(MsgType::Release, {});
    } catch (const Error&) {
      mark_dead(s);
    }
  }
  out.final_model = global;
  out.final_digest = weights_digest(global);
  if (!opts.model_out.empty()) save_model_file(global, opts.model_out);
  out.energy.power_w = opts.power_w;
  out.energy.total_j = energy_joules(opts.power_w, tm.total_s());
  return out;
}

ClientRunResult fl_client_run(const Dataset& data, const FLClientOptions& opts) {
  if (data.empty()) throw Error(Err::invalid_argument, "client dataset is empty");
  if (!(opts.local_fraction > 0.0) || opts.local_fraction > 1.0)
    throw Error(Err::invalid_argument, "local fraction must be in (0,1]");
  if (opts.fedoff && opts.local_fraction < 1.0 && opts.key.empty())
    throw Error(Err::invalid_argument, "shard offload requires an encryption key");

  ClientRunResult out;
  TimingReport& tm = out.timing;
  const double session_t0 = now_monotonic_s();

  auto [host, port] = parse_endpoint(opts.endpoint);
  Socket sock;
  {
    PhaseAcc acc(tm.init_s);
    sock = tcp_connect(host, port, std::min(opts.timeout_s, 30.0));
    sock.set_recv_timeout(opts.timeout_s);
    sock.set_send_timeout(opts.timeout_s);
    sock.send_msg(MsgType::Hello, {});
    Message m = sock.recv_msg();
    if (m.type != MsgType::Welcome)
      throw Error(Err::protocol, "expected a welcome message");
    out.client_id = decode_welcome(m.payload);
  }

  // data-offload: ship the non-local shard once, before the first round
  Dataset local;
  const Dataset* local_ptr = &data;
  bool shard_sent = false;
  if (opts.fedoff && opts.local_fraction < 1.0) {
    if (opts.key.empty())
      throw Error(Err::invalid_argument, "shard offload requires an encryption key");
    auto split = split_dataset(data, opts.local_fraction, opts.seed);
    local = std::move(split.first);
    local_ptr = &local;
    std::string csv = split.second.to_csv();
    std::string token;
    {
      PhaseAcc acc(tm.crypt_s);
      token = fernet_encrypt(opts.key, Bytes(csv.begin(), csv.end()));
    }
    {
      PhaseAcc acc(tm.tr_s);
      sock.send_msg(MsgType::DataShard, encode_data_shard(out.client_id, token));
    }
    shard_sent = true;
  }

  auto split = train_test_split(*local_ptr, opts.seed);
  if (split.first.empty() || split.second.empty())
    throw Error(Err::invalid_argument, "local dataset too small to split");
  Examples train_ex = split.first.to_examples();
  Examples test_ex = split.second.to_examples();

  KeepBest keep;
  int round = 0;
  auto persist = [&] {
    if (!opts.model_out.empty() && round > 0)
      save_model_file(keep.retained(), opts.model_out);
  };

  try {
    for (;;) {
      Message m;
      {
        PhaseAcc acc(tm.tr_s);
        m = sock.recv_msg();
      }
      if (m.type == MsgType::Release) break;
      if (m.type == MsgType::Error) {
        std::string text = decode_error_text(m.payload);
        if (shard_sent && round == 0)
          throw Error(Err::crypto_invalid, "server rejected the shard: " + text);
        throw Error(Err::runtime, "server error: " + text);
      }
      if (m.type != MsgType::GlobalWeights)
        throw Error(Err::protocol, "unexpected message from server");

      ModelWeights global = deserialize_weights(m.payload);
      ++round;
      TrainConfig cfg = opts.train;
      cfg.seed = derive_seed(opts.seed, 0x7247, uint64_t(round));
      TrainResult res;
      {
        PhaseAcc acc(tm.loc_s);
        res = train(global, train_ex, cfg);
      }
      Metrics met = evaluate(res.weights, test_ex);
      keep.offer(res.weights, met.accuracy);
      out.rounds.push_back({round, met.accuracy, met.loss});

      Bytes payload = serialize_weights(res.weights);
      {
        PhaseAcc acc(tm.tr_s);
        sock.send_msg(MsgType::ClientWeights, payload);
      }
    }
  } catch (const Error&) {
    persist();  // partial result on connection loss or server error
    throw;
  }

  if (round == 0) throw Error(Err::runtime, "released before any training round");
  out.retained_model = keep.retained();
  out.best_accuracy = keep.best_accuracy;
  persist();

  double residual = (now_monotonic_s() - session_t0) -
                    (tm.init_s + tm.tr_s + tm.loc_s + tm.crypt_s);
  tm.exm_s = std::max(0.0, residual);
  out.energy.power_w = opts.power_w;
  out.energy.total_j = energy_joules(opts.power_w, tm.total_s());
  return out;
}

}  // namespace floff
