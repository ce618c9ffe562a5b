#include "floff.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>

#include "floff/config.hpp"
#include "floff/decision.hpp"
#include "floff/fernet.hpp"
#include "floff/fl.hpp"
#include "floff/sim.hpp"
#include "floff/tasks.hpp"
#include "json.hpp"

using nlohmann::json;

struct floff_config {
  floff::Config cfg;
};
struct floff_model {
  floff::ModelWeights weights;
};
struct floff_service {
  std::unique_ptr<floff::TaskService> svc;
};

namespace {

using namespace floff;

thread_local std::string g_last_error = "";

floff_status status_of(Err e) {
  switch (e) {
    case Err::invalid_argument: return FLOFF_EINVAL;
    case Err::io: return FLOFF_EIO;
    case Err::protocol: return FLOFF_EPROTO;
    case Err::crypto_invalid: return FLOFF_ECRYPTO;
    case Err::crypto_expired: return FLOFF_EEXPIRED;
    case Err::timeout: return FLOFF_ETIMEOUT;
    case Err::diverged: return FLOFF_EDIVERGED;
    case Err::runtime: return FLOFF_ERUNTIME;
  }
  return FLOFF_ERUNTIME;
}

template <typename F>
floff_status wrap(F&& fn) noexcept {
  try {
    fn();
    return FLOFF_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return FLOFF_ERUNTIME;
  } catch (...) {
    g_last_error = "unknown failure";
    return FLOFF_ERUNTIME;
  }
}

void need(const void* p, const char* what) {
  if (!p) throw Error(Err::invalid_argument, std::string(what) + " must not be null");
}

char* dup_text(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw Error(Err::runtime, "out of memory");
  std::memcpy(p, s.data(), s.size() + 1);
  return p;
}

std::string text_of_file(const std::string& path) {
  auto raw = read_file(path);
  return std::string(raw.begin(), raw.end());
}

void write_text(const std::string& path, const std::string& text) {
  write_file(path, Bytes(text.begin(), text.end()));
}

// relative artifact paths land under the run's output directory
std::string resolve_under(const std::string& out_dir, const std::string& path) {
  if (path.empty()) return path;
  std::filesystem::path p(path);
  if (p.is_absolute() || out_dir.empty()) return path;
  return (std::filesystem::path(out_dir) / p).string();
}

Optimizer optimizer_from_name(const std::string& name) {
  if (name == "adam") return Optimizer::Adam;
  if (name == "sgd") return Optimizer::SGD;
  throw Error(Err::invalid_argument, "unknown optimizer: " + name);
}

ArchSpec parse_arch(const std::string& spec) {
  auto colon = spec.find(':');
  if (colon == std::string::npos)
    throw Error(Err::invalid_argument, "arch spec must look like mlp:10,64,2");
  std::string kind = spec.substr(0, colon);
  std::vector<uint16_t> dims;
  std::string rest = spec.substr(colon + 1);
  size_t pos = 0;
  while (pos <= rest.size()) {
    auto comma = rest.find(',', pos);
    std::string tok = rest.substr(pos, comma == std::string::npos ? std::string::npos
                                                                  : comma - pos);
    if (tok.empty()) throw Error(Err::invalid_argument, "empty arch dimension");
    uint64_t v = parse_u64(tok);
    if (v == 0 || v > 0xFFFF) throw Error(Err::invalid_argument, "arch dimension out of range");
    dims.push_back(static_cast<uint16_t>(v));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (kind == "mlp") return ArchSpec::mlp(dims);
  if (kind == "lstm") {
    if (dims.size() != 4)
      throw Error(Err::invalid_argument, "lstm arch needs input,hidden,seq_len,classes");
    return ArchSpec::lstm(dims[0], dims[1], dims[2], dims[3]);
  }
  throw Error(Err::invalid_argument, "unknown architecture kind: " + kind);
}

Dataset load_dataset_auto(const std::string& path) {
  auto text = text_of_file(path);
  return Dataset::from_csv(sniff_csv_kind(text), text);
}

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  size_t pos = 0;
  while (pos <= s.size()) {
    auto c = s.find(sep, pos);
    out.push_back(s.substr(pos, c == std::string::npos ? std::string::npos : c - pos));
    if (c == std::string::npos) break;
    pos = c + 1;
  }
  return out;
}

TaskRequest parse_task_spec(const std::string& spec, uint64_t seed) {
  auto colon = spec.find(':');
  if (colon == std::string::npos)
    throw Error(Err::invalid_argument,
                "task spec must look like name:args (e.g. matmul:300)");
  TaskRequest r;
  r.type = task_type_from_name(spec.substr(0, colon));
  r.request_id = derive_seed(seed, fnv1a64_str(spec));
  auto args = split_list(spec.substr(colon + 1), ',');
  auto want = [&](size_t lo, size_t hi) {
    if (args.size() < lo || args.size() > hi)
      throw Error(Err::invalid_argument, "wrong argument count for task spec: " + spec);
  };
  switch (r.type) {
    case TaskType::CalculatorAdd:
    case TaskType::CalculatorSub:
    case TaskType::CalculatorMul:
    case TaskType::CalculatorDiv: {
      want(2, 2);
      r.args = CalculatorArgs{parse_i64(args[0]), parse_i64(args[1])};
      break;
    }
    case TaskType::MatrixMultiply: {
      want(1, 3);
      MatMulArgs a;
      a.order = static_cast<uint32_t>(parse_u64(args[0]));
      a.seed_a = args.size() > 1 ? parse_u64(args[1]) : 1;
      a.seed_b = args.size() > 2 ? parse_u64(args[2]) : 2;
      if (a.order == 0) throw Error(Err::invalid_argument, "matrix order must be positive");
      r.args = a;
      break;
    }
    case TaskType::FileCreate: {
      want(1, 2);
      FileCreateArgs a;
      a.size_bytes = static_cast<uint32_t>(parse_u64(args[0]));
      a.content_seed = args.size() > 1 ? parse_u64(args[1]) : 1;
      r.args = a;
      break;
    }
    case TaskType::Sort: {
      want(1, 2);
      SortArgs a;
      a.count = static_cast<uint32_t>(parse_u64(args[0]));
      a.seed = args.size() > 1 ? parse_u64(args[1]) : 1;
      r.args = a;
      break;
    }
    case TaskType::Search: {
      want(1, 3);
      SearchArgs a;
      a.count = static_cast<uint32_t>(parse_u64(args[0]));
      a.seed = args.size() > 1 ? parse_u64(args[1]) : 1;
      a.needle = args.size() > 2 ? parse_i64(args[2]) : 12345;
      r.args = a;
      break;
    }
  }
  if (r.magnitude() == 0) throw Error(Err::invalid_argument, "task magnitude must be > 0");
  return r;
}

CostModel cost_model_from(const Config& c) {
  CostModel m;
  m.device_rate = c.get_f64("device_rate", m.device_rate);
  m.edge_speed = c.get_f64("edge_speed", m.edge_speed);
  m.cloud_speed = c.get_f64("cloud_speed", m.cloud_speed);
  m.link_mbps = c.get_f64("link_mbps", m.link_mbps);
  m.msg_latency_s = c.get_f64("msg_latency_s", m.msg_latency_s);
  m.power_w = c.get_f64("power_w", m.power_w);
  if (m.device_rate <= 0 || m.edge_speed <= 0 || m.cloud_speed <= 0 ||
      m.link_mbps <= 0 || m.msg_latency_s < 0 || m.power_w < 0)
    throw Error(Err::invalid_argument, "cost model parameters must be positive");
  return m;
}

// accepts the dataset header (label column ignored) or the same header
// without the label column; returns the trailing length-10 window
std::vector<NetworkSnapshot> parse_window_csv(const std::string& path) {
  auto text = text_of_file(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(Err::io, "window csv: empty file");
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
  bool with_label;
  if (line == "uplink_mbps,downlink_mbps,throughput_mbps,latency_ms,bandwidth_mbps,label")
    with_label = true;
  else if (line == "uplink_mbps,downlink_mbps,throughput_mbps,latency_ms,bandwidth_mbps")
    with_label = false;
  else
    throw Error(Err::io, "window csv: unrecognized header: " + line);
  const size_t want_cols = with_label ? 6 : 5;
  std::vector<NetworkSnapshot> rows;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    if (line.empty()) continue;
    auto cols = split_list(line, ',');
    if (cols.size() != want_cols)
      throw Error(Err::io, "window csv line " + std::to_string(lineno) +
                               ": want " + std::to_string(want_cols) + " columns");
    NetworkSnapshot s;
    s.uplink_mbps = parse_double(cols[0]);
    s.downlink_mbps = parse_double(cols[1]);
    s.throughput_mbps = parse_double(cols[2]);
    s.latency_ms = parse_double(cols[3]);
    s.bandwidth_mbps = parse_double(cols[4]);
    rows.push_back(s);
  }
  if (rows.size() < kWindowLen)
    throw Error(Err::invalid_argument,
                "window csv needs at least " + std::to_string(kWindowLen) + " rows");
  return std::vector<NetworkSnapshot>(rows.end() - kWindowLen, rows.end());
}

std::string run_id_of(const std::string& subcommand, const Config& cfg) {
  return to_hex_u64(fnv1a64_str(subcommand + "\n" + cfg.to_text()));
}

json timing_json(const TimingReport& t) {
  return json{{"init", t.init_s}, {"tr", t.tr_s},       {"loc", t.loc_s},
              {"exm", t.exm_s},   {"ser", t.ser_s},     {"agg", t.agg_s},
              {"crypt", t.crypt_s}, {"train", t.train_s()}, {"total", t.total_s()}};
}

json energy_json(const EnergyReport& e) {
  return json{{"power_w", e.power_w}, {"total_j", e.total_j}};
}

void write_report_json(const std::string& out_dir, const std::string& subcommand,
                       const Config& cfg, const json& rounds, const TimingReport& tm,
                       const EnergyReport& en) {
  json cfg_json = json::object();
  for (const auto& [k, v] : cfg.entries()) cfg_json[k] = v;
  json j{{"run_id", run_id_of(subcommand, cfg)},
         {"subcommand", subcommand},
         {"config", cfg_json},
         {"rounds", rounds},
         {"timing", timing_json(tm)},
         {"energy", energy_json(en)}};
  std::filesystem::create_directories(out_dir);
  write_text((std::filesystem::path(out_dir) / "report.json").string(), j.dump(2) + "\n");
}

FLServerOptions server_opts_from(const Config& c, bool fedoff,
                                 const std::string& out_dir) {
  FLServerOptions o;
  o.endpoint = c.get("endpoint", "127.0.0.1:4747");
  o.rounds = static_cast<int>(c.get_i64("rounds", 10));
  o.participant_fraction = c.get_f64("fraction", 1.0);
  o.expected_clients = static_cast<int>(c.get_i64("clients", 4));
  o.accept_timeout_s = c.get_f64("accept_timeout_s", 60.0);
  o.round_timeout_s = c.get_f64("round_timeout_s", 300.0);
  o.seed = c.get_u64("seed", 0);
  o.arch = parse_arch(c.get("arch", "mlp:10,64,2"));
  o.init_seed = c.get_u64("init_seed", 1);
  o.power_w = c.get_f64("power_w", 5.0);
  o.model_out = resolve_under(out_dir, c.get("model_out", "global.model"));
  o.fedoff = fedoff;
  if (fedoff) {
    o.local_fraction = c.get_f64("local_fraction", 1.0);
    if (o.local_fraction < 1.0) o.keys_dir = c.require("keys_dir");
    o.server_train.epochs = static_cast<int>(c.get_i64("epochs", 10));
    o.server_train.batch_size = static_cast<int>(c.get_i64("batch", 200));
    o.server_train.learning_rate = c.get_f64("lr", 1e-3);
    o.server_train.optimizer = optimizer_from_name(c.get("optimizer", "adam"));
    o.server_seed = c.get_u64("server_seed", o.seed);
  }
  return o;
}

FLClientOptions client_opts_from(const Config& c, bool fedoff,
                                 const std::string& out_dir) {
  FLClientOptions o;
  o.endpoint = c.get("endpoint", "127.0.0.1:4747");
  o.train.epochs = static_cast<int>(c.get_i64("epochs", 10));
  o.train.batch_size = static_cast<int>(c.get_i64("batch", 200));
  o.train.learning_rate = c.get_f64("lr", 1e-3);
  o.train.optimizer = optimizer_from_name(c.get("optimizer", "adam"));
  o.seed = c.get_u64("seed", 0);
  o.power_w = c.get_f64("power_w", 5.0);
  o.timeout_s = c.get_f64("timeout_s", 600.0);
  o.model_out = resolve_under(out_dir, c.get("model_out", "client.model"));
  o.fedoff = fedoff;
  if (fedoff) {
    o.local_fraction = c.get_f64("local_fraction", 1.0);
    if (o.local_fraction < 1.0) {
      o.key = c.get("key", "");
      if (o.key.empty()) {
        std::string kf = c.require("key_file");
        std::string raw = text_of_file(kf);
        while (!raw.empty() && (raw.back() == '\n' || raw.back() == '\r')) raw.pop_back();
        o.key = raw;
      }
    }
  }
  return o;
}

void run_server(const floff_config* cfg, const char* out_dir, bool fedoff) {
  need(cfg, "cfg");
  need(out_dir, "out_dir");
  const std::string sub = fedoff ? "fedoff-server" : "fl-server";
  auto opts = server_opts_from(cfg->cfg, fedoff, out_dir);
  std::filesystem::create_directories(out_dir);
  ServerRunResult res = fl_server_run(opts);
  json rounds = json::array();
  for (const auto& r : res.rounds) {
    json participants = json::array();
    for (uint32_t id : r.participant_ids) participants.push_back(id);
    rounds.push_back(json{{"index", r.index},
                          {"participants", participants},
                          {"accuracy", r.accuracy ? json(*r.accuracy) : json(nullptr)},
                          {"loss", r.loss ? json(*r.loss) : json(nullptr)}});
  }
  write_report_json(out_dir, sub, cfg->cfg, rounds, res.timing, res.energy);
}

void run_client(const floff_config* cfg, const char* out_dir, bool fedoff) {
  need(cfg, "cfg");
  need(out_dir, "out_dir");
  const std::string sub = fedoff ? "fedoff-client" : "fl-client";
  auto opts = client_opts_from(cfg->cfg, fedoff, out_dir);
  Dataset data = load_dataset_auto(cfg->cfg.require("data"));
  std::filesystem::create_directories(out_dir);
  ClientRunResult res = fl_client_run(data, opts);
  json rounds = json::array();
  for (const auto& r : res.rounds)
    rounds.push_back(json{{"index", r.index},
                          {"participants", json::array({res.client_id})},
                          {"accuracy", r.accuracy},
                          {"loss", r.loss}});
  write_report_json(out_dir, sub, cfg->cfg, rounds, res.timing, res.energy);
}

Decision decide_from_config(const Config& c, const std::string& task_spec,
                            const std::string& pref, const char* window_csv) {
  TaskRequest req = parse_task_spec(task_spec, c.get_u64("seed", 0));
  TaskDescriptor task;
  task.type = req.type;
  task.magnitude = req.magnitude();
  if (pref == "local")
    task.pref = UserPref::LocalAccess;
  else if (pref == "remote")
    task.pref = UserPref::RemoteAccess;
  else
    throw Error(Err::invalid_argument, "pref must be local or remote");

  ModelWeights stage1 = load_model_file(c.require("stage1_model"));
  Decision d;
  d.stage1 = predict_intensive(stage1, task);
  if (d.stage1 == Stage1Class::NotIntensive) {
    d.stage2_applied = false;
    d.verdict = task.pref == UserPref::RemoteAccess ? Verdict::OffloadCloud
                                                    : Verdict::LocalExecute;
    return d;
  }
  // stage 2 material is only touched on the intensive path
  ModelWeights stage2 = load_model_file(c.require("stage2_model"));
  std::string wpath = window_csv ? window_csv : c.get("window", "");
  if (wpath.empty())
    throw Error(Err::invalid_argument, "intensive task needs a network window csv");
  auto window = parse_window_csv(wpath);
  DecideStats stats;
  d = decide(task, window, stage1, stage2, &stats);
  return d;
}

}  // namespace

extern "C" {

const char* floff_version(void) { return "0.1.0"; }

const char* floff_last_error(void) { return g_last_error.c_str(); }

floff_config* floff_config_new(void) { return new floff_config{}; }

floff_status floff_config_load(const char* path, floff_config** out) {
  return wrap([&] {
    need(path, "path");
    need(out, "out");
    auto c = std::make_unique<floff_config>();
    c->cfg = Config::load(path);
    *out = c.release();
  });
}

floff_status floff_config_set(floff_config* cfg, const char* key, const char* value) {
  return wrap([&] {
    need(cfg, "cfg");
    need(key, "key");
    need(value, "value");
    cfg->cfg.set(key, value);
  });
}

const char* floff_config_get(const floff_config* cfg, const char* key) {
  if (!cfg || !key) return nullptr;
  auto it = cfg->cfg.entries().find(key);
  return it == cfg->cfg.entries().end() ? nullptr : it->second.c_str();
}

const char* floff_config_next_key(const floff_config* cfg, const char* prev_key) {
  if (!cfg) return nullptr;
  const auto& m = cfg->cfg.entries();
  auto it = prev_key ? m.upper_bound(prev_key) : m.begin();
  return it == m.end() ? nullptr : it->first.c_str();
}

floff_status floff_config_write(const floff_config* cfg, const char* path) {
  return wrap([&] {
    need(cfg, "cfg");
    need(path, "path");
    cfg->cfg.save(path);
  });
}

void floff_config_free(floff_config* cfg) { delete cfg; }

floff_status floff_generate_dataset(int stage, uint64_t n, uint64_t seed,
                                    double label_noise, const char* csv_path) {
  return wrap([&] {
    need(csv_path, "csv_path");
    if (stage == 1) {
      generate_stage1_dataset(n, seed, label_noise).save_csv(csv_path);
    } else if (stage == 2) {
      if (label_noise != 0.0)
        throw Error(Err::invalid_argument, "label noise applies to stage 1 only");
      generate_stage2_dataset(n, seed).save_csv(csv_path);
    } else {
      throw Error(Err::invalid_argument, "stage must be 1 or 2");
    }
  });
}

floff_status floff_model_init(const char* arch, uint64_t seed, floff_model** out) {
  return wrap([&] {
    need(arch, "arch");
    need(out, "out");
    auto m = std::make_unique<floff_model>();
    m->weights = init_model(parse_arch(arch), seed);
    *out = m.release();
  });
}

floff_status floff_model_load(const char* path, floff_model** out) {
  return wrap([&] {
    need(path, "path");
    need(out, "out");
    auto m = std::make_unique<floff_model>();
    m->weights = load_model_file(path);
    *out = m.release();
  });
}

floff_status floff_model_save(const floff_model* model, const char* path) {
  return wrap([&] {
    need(model, "model");
    need(path, "path");
    save_model_file(model->weights, path);
  });
}

void floff_model_free(floff_model* model) { delete model; }

floff_status floff_model_train(floff_model* model, const char* dataset_csv,
                               int epochs, int batch, double learning_rate,
                               const char* optimizer, uint64_t seed,
                               double* train_accuracy, double* train_loss) {
  return wrap([&] {
    need(model, "model");
    need(dataset_csv, "dataset_csv");
    need(optimizer, "optimizer");
    TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.batch_size = batch;
    cfg.learning_rate = learning_rate;
    cfg.optimizer = optimizer_from_name(optimizer);
    cfg.seed = seed;
    Examples ex = load_dataset_auto(dataset_csv).to_examples();
    TrainResult res = train(model->weights, ex, cfg);
    model->weights = res.weights;
    if (train_accuracy) *train_accuracy = res.metrics.accuracy;
    if (train_loss) *train_loss = res.metrics.loss;
  });
}

floff_status floff_model_evaluate(const floff_model* model, const char* dataset_csv,
                                  double* accuracy, double* loss) {
  return wrap([&] {
    need(model, "model");
    need(dataset_csv, "dataset_csv");
    Examples ex = load_dataset_auto(dataset_csv).to_examples();
    Metrics met = evaluate(model->weights, ex);
    if (accuracy) *accuracy = met.accuracy;
    if (loss) *loss = met.loss;
  });
}

floff_status floff_model_digest(const floff_model* model, uint64_t* digest) {
  return wrap([&] {
    need(model, "model");
    need(digest, "digest");
    *digest = weights_digest(model->weights);
  });
}

floff_status floff_fernet_keygen(char key_out[45]) {
  return wrap([&] {
    need(key_out, "key_out");
    std::string key = fernet_generate_key();
    if (key.size() != 44) throw Error(Err::runtime, "unexpected key length");
    std::memcpy(key_out, key.c_str(), 45);
  });
}

floff_status floff_fernet_encrypt(const char* key, const uint8_t* data, size_t len,
                                  char** token_out) {
  return wrap([&] {
    need(key, "key");
    need(token_out, "token_out");
    if (len > 0) need(data, "data");
    std::string token = fernet_encrypt(key, std::span<const uint8_t>(data, len));
    *token_out = dup_text(token);
  });
}

floff_status floff_fernet_decrypt(const char* key, const char* token, int64_t ttl_s,
                                  uint8_t** data_out, size_t* len_out) {
  return wrap([&] {
    need(key, "key");
    need(token, "token");
    need(data_out, "data_out");
    need(len_out, "len_out");
    std::optional<int64_t> ttl;
    if (ttl_s >= 0) ttl = ttl_s;
    Bytes plain = fernet_decrypt(key, token, ttl);
    auto* p = static_cast<uint8_t*>(std::malloc(plain.size() ? plain.size() : 1));
    if (!p) throw Error(Err::runtime, "out of memory");
    if (!plain.empty()) std::memcpy(p, plain.data(), plain.size());
    *data_out = p;
    *len_out = plain.size();
  });
}

void floff_buffer_free(void* p) { std::free(p); }

floff_status floff_fl_server_run(const floff_config* cfg, const char* out_dir) {
  return wrap([&] { run_server(cfg, out_dir, false); });
}

floff_status floff_fl_client_run(const floff_config* cfg, const char* out_dir) {
  return wrap([&] { run_client(cfg, out_dir, false); });
}

floff_status floff_fedoff_server_run(const floff_config* cfg, const char* out_dir) {
  return wrap([&] { run_server(cfg, out_dir, true); });
}

floff_status floff_fedoff_client_run(const floff_config* cfg, const char* out_dir) {
  return wrap([&] { run_client(cfg, out_dir, true); });
}

floff_status floff_service_start(const char* site, const floff_config* cfg,
                                 uint16_t* port_out, floff_service** out) {
  return wrap([&] {
    need(site, "site");
    need(cfg, "cfg");
    need(out, "out");
    const Config& c = cfg->cfg;
    std::string s(site);
    ExecSite where;
    std::string default_ep;
    if (s == "edge") {
      where = ExecSite::Edge;
      default_ep = "127.0.0.1:4848";
    } else if (s == "cloud") {
      where = ExecSite::Cloud;
      default_ep = "127.0.0.1:4949";
    } else {
      throw Error(Err::invalid_argument, "site must be edge or cloud");
    }
    auto [host, port] = parse_endpoint(c.get("endpoint", default_ep));
    ServicePolicy policy;
    policy.max_concurrent = static_cast<int>(c.get_i64("max_concurrent", 8));
    policy.max_matmul_order =
        static_cast<uint32_t>(c.get_u64("max_matmul_order", 0));
    std::string cloud_ep =
        where == ExecSite::Edge ? c.get("cloud_endpoint", "127.0.0.1:4949") : "";
    auto svc = std::make_unique<floff_service>();
    svc->svc = std::make_unique<TaskService>(where, host, port, policy,
                                             c.get("sandbox_dir", ""), cloud_ep);
    svc->svc->start();
    if (port_out) *port_out = svc->svc->port();
    *out = svc.release();
  });
}

floff_status floff_service_stop(floff_service* service) {
  return wrap([&] {
    need(service, "service");
    service->svc->stop();
    delete service;
  });
}

floff_status floff_task_exec(const floff_config* cfg, const char* task_spec,
                             const char* mode, const char* out_path) {
  return wrap([&] {
    need(cfg, "cfg");
    need(task_spec, "task_spec");
    need(mode, "mode");
    const Config& c = cfg->cfg;
    TaskRequest req = parse_task_spec(task_spec, c.get_u64("seed", 0));
    CostModel cost = cost_model_from(c);
    std::string sandbox = c.get("sandbox_dir", "");
    std::string edge_ep = c.get("edge_endpoint", "127.0.0.1:4848");
    std::string cloud_ep = c.get("cloud_endpoint", "127.0.0.1:4949");
    double timeout = c.get_f64("timeout_s", 120.0);

    std::string m(mode);
    Decision d;
    bool routed = false;
    if (m == "local") {
      d.verdict = Verdict::LocalExecute;
    } else if (m == "edge") {
      d.verdict = Verdict::OffloadEdge;
    } else if (m == "cloud") {
      d.verdict = Verdict::OffloadCloud;
    } else if (m == "auto") {
      d = decide_from_config(c, task_spec, c.get("pref", "local"), nullptr);
      routed = true;
    } else {
      throw Error(Err::invalid_argument, "mode must be local, edge, cloud, or auto");
    }

    ExecutionRecord rec =
        execute_routed(req, d, cost, sandbox, edge_ep, cloud_ep, timeout);

    if (out_path) {
      json j{{"task", task_spec},
             {"mode", m},
             {"executed_at", exec_site_name(rec.executed_at)},
             {"forwarded", rec.forwarded},
             {"ok", rec.ok},
             {"response_time_s", rec.response_time_s},
             {"energy_j", rec.energy_j},
             {"power_w", cost.power_w},
             {"digest", to_hex_u64(rec.digest)}};
      if (routed) {
        j["verdict"] = verdict_name(rec.decision.verdict);
        j["stage1"] = stage1_name(rec.decision.stage1);
        j["stage2_applied"] = rec.decision.stage2_applied;
      }
      write_text(out_path, j.dump(2) + "\n");
    }
  });
}

floff_status floff_task_compare(const floff_config* cfg, const char* task_spec,
                                const char* out_path) {
  return wrap([&] {
    need(cfg, "cfg");
    need(task_spec, "task_spec");
    const Config& c = cfg->cfg;
    TaskRequest req = parse_task_spec(task_spec, c.get_u64("seed", 0));
    CostModel cost = cost_model_from(c);
    CostRow row = compare_costs(req, cost, c.get("edge_endpoint", "127.0.0.1:4848"),
                                c.get("sandbox_dir", ""), c.get_f64("timeout_s", 120.0));
    if (out_path) {
      json j{{"task", row.task_name},
             {"magnitude", row.magnitude},
             {"local_s", row.local_s},
             {"local_j", row.local_j},
             {"offload_s", row.offload_s},
             {"offload_j", row.offload_j},
             {"cheaper", row.offload_cheaper ? "offload" : "local"},
             {"savings_fraction", row.savings_fraction},
             {"digest", to_hex_u64(row.digest)}};
      write_text(out_path, j.dump(2) + "\n");
    }
  });
}

floff_status floff_decide(const floff_config* cfg, const char* task_spec,
                          const char* pref, const char* window_csv,
                          const char** verdict_out) {
  return wrap([&] {
    need(cfg, "cfg");
    need(task_spec, "task_spec");
    need(pref, "pref");
    need(verdict_out, "verdict_out");
    Decision d = decide_from_config(cfg->cfg, task_spec, pref, window_csv);
    *verdict_out = verdict_name(d.verdict);
  });
}

floff_status floff_simulate(const floff_config* cfg, const char* csv_path,
                            const char* json_path) {
  return wrap([&] {
    need(cfg, "cfg");
    const Config& c = cfg->cfg;
    bool preset = c.get("preset", "") == "paper-shape";
    std::vector<SimResult> rows;
    for (const auto& tok : split_list(c.get("users", "100"), ',')) {
      int users = static_cast<int>(parse_i64(tok));
      SimConfig sc = preset ? paper_shape_preset(users, c.get_u64("seed", 1))
                            : SimConfig{};
      if (!preset) {
        sc.users = users;
        sc.link_mbps = c.get_f64("link_mbps", sc.link_mbps);
        sc.task_bits_min = c.get_f64("task_bits_min", sc.task_bits_min);
        sc.task_bits_max = c.get_f64("task_bits_max", sc.task_bits_max);
        sc.per_user_rate = c.get_f64("per_user_rate", sc.per_user_rate);
        sc.service_rate = c.get_f64("service_rate", sc.service_rate);
        sc.mode = queue_mode_from_name(c.get("mode", "mm1"));
        sc.power_w = c.get_f64("power_w", sc.power_w);
        sc.seed = c.get_u64("seed", sc.seed);
        sc.samples = c.get_u64("samples", sc.samples);
      }
      rows.push_back(simulate(sc));
    }
    if (csv_path) write_text(csv_path, sim_csv(rows));
    if (json_path) {
      json arr = json::array();
      for (const auto& r : rows)
        arr.push_back(json{{"users", r.users},
                           {"avg_response_s", r.avg_response_s},
                           {"avg_energy_j", r.avg_energy_j},
                           {"utilization", r.utilization},
                           {"samples", r.samples}});
      json cfg_json = json::object();
      for (const auto& [k, v] : c.entries()) cfg_json[k] = v;
      write_text(json_path, json{{"rows", arr}, {"config", cfg_json}}.dump(2) + "\n");
    }
  });
}

floff_status floff_report_render(const char* report_json_path, char** text_out) {
  return wrap([&] {
    need(report_json_path, "report_json_path");
    need(text_out, "text_out");
    json j = json::parse(text_of_file(report_json_path));
    std::ostringstream out;
    out << "run " << j.at("run_id").get<std::string>() << " ("
        << j.at("subcommand").get<std::string>() << ")\n";
    out << "round  participants                accuracy    loss\n";
    for (const auto& r : j.at("rounds")) {
      std::string ids = "[";
      bool first = true;
      for (const auto& p : r.at("participants")) {
        if (!first) ids += ",";
        ids += std::to_string(p.get<uint64_t>());
        first = false;
      }
      ids += "]";
      char acc[32], loss[32];
      if (r.at("accuracy").is_null())
        std::snprintf(acc, sizeof acc, "%10s", "-");
      else
        std::snprintf(acc, sizeof acc, "%10.4f", r.at("accuracy").get<double>());
      if (r.at("loss").is_null())
        std::snprintf(loss, sizeof loss, "%10s", "-");
      else
        std::snprintf(loss, sizeof loss, "%10.4f", r.at("loss").get<double>());
      char line[128];
      std::snprintf(line, sizeof line, "%5d  %-26s %s  %s\n",
                    r.at("index").get<int>(), ids.c_str(), acc, loss);
      out << line;
    }
    const json& t = j.at("timing");
    out << "timing (s): init=" << format_double(t.at("init").get<double>())
        << " tr=" << format_double(t.at("tr").get<double>())
        << " loc=" << format_double(t.at("loc").get<double>())
        << " exm=" << format_double(t.at("exm").get<double>())
        << " ser=" << format_double(t.at("ser").get<double>())
        << " agg=" << format_double(t.at("agg").get<double>())
        << " crypt=" << format_double(t.at("crypt").get<double>()) << "\n";
    out << "  train=" << format_double(t.at("train").get<double>())
        << " total=" << format_double(t.at("total").get<double>()) << "\n";
    const json& e = j.at("energy");
    out << "energy: power_w=" << format_double(e.at("power_w").get<double>())
        << " total_j=" << format_double(e.at("total_j").get<double>()) << "\n";

    TimingReport tm;
    tm.init_s = t.at("init").get<double>();
    tm.tr_s = t.at("tr").get<double>();
    tm.loc_s = t.at("loc").get<double>();
    tm.exm_s = t.at("exm").get<double>();
    tm.ser_s = t.at("ser").get<double>();
    tm.agg_s = t.at("agg").get<double>();
    tm.crypt_s = t.at("crypt").get<double>();
    bool train_ok = tm.train_s() == t.at("train").get<double>();
    bool total_ok = tm.total_s() == t.at("total").get<double>();
    bool energy_ok = e.at("power_w").get<double>() * tm.total_s() ==
                     e.at("total_j").get<double>();
    out << "identities: train-sum " << (train_ok ? "ok" : "VIOLATED") << ", total "
        << (total_ok ? "ok" : "VIOLATED") << ", energy " << (energy_ok ? "ok" : "VIOLATED")
        << "\n";
    *text_out = dup_text(out.str());
  });
}

}  // extern "C"
