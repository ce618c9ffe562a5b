// floff — operator CLI for the federated offloading toolkit.
// All engine work goes through the C API in floff.h; this file only parses
// flags, resolves the run configuration, writes the run manifest, and renders
// results.
#include <atomic>
#include <csignal>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <list>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "floff.h"
#include "json.hpp"

using nlohmann::json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct ConfigDeleter {
  void operator()(floff_config* c) const { floff_config_free(c); }
};
using ConfigPtr = std::unique_ptr<floff_config, ConfigDeleter>;

[[noreturn]] void die_usage(const std::string& msg) {
  std::cerr << "error: " << msg << "\n";
  std::exit(kExitUsage);
}

[[noreturn]] void die_runtime(const std::string& msg) {
  std::cerr << "error: " << msg << "\n";
  std::exit(kExitRuntime);
}

void check(floff_status st) {
  if (st != FLOFF_OK) die_runtime(floff_last_error());
}

// a flag whose value, when given, lands in the run configuration under `key`
struct KeyOpt {
  CLI::Option* opt = nullptr;
  std::string key;
  std::string value;
};

KeyOpt& add_key(CLI::App* sub, std::list<KeyOpt>& opts, const std::string& flag,
                const std::string& key, const std::string& desc) {
  opts.emplace_back();
  KeyOpt& ko = opts.back();
  ko.key = key;
  ko.opt = sub->add_option(flag, ko.value, desc);
  return ko;
}

std::string cfg_get(const floff_config* cfg, const std::string& key,
                    const std::string& fallback) {
  const char* v = floff_config_get(cfg, key.c_str());
  return v ? v : fallback;
}

uint64_t cfg_get_u64(const floff_config* cfg, const std::string& key,
                     uint64_t fallback) {
  const char* v = floff_config_get(cfg, key.c_str());
  if (!v) return fallback;
  try {
    return std::stoull(v);
  } catch (...) {
    die_runtime("config key " + key + " is not an unsigned integer: " + v);
  }
}

double cfg_get_f64(const floff_config* cfg, const std::string& key, double fallback) {
  const char* v = floff_config_get(cfg, key.c_str());
  if (!v) return fallback;
  try {
    return std::stod(v);
  } catch (...) {
    die_runtime("config key " + key + " is not a number: " + v);
  }
}

// task flags shared by `decide` and `exec`; composed into the task_spec key
struct TaskFlags {
  std::string spec, task, a, b, n, size, count, needle;
  std::string seed_a, seed_b, content_seed, data_seed;

  void add_to(CLI::App* sub) {
    sub->add_option("--spec", spec, "full task spec, e.g. matmul:300,1,2");
    sub->add_option("--task", task,
                    "task name: calc_add calc_sub calc_mul calc_div matmul "
                    "file_create sort search");
    sub->add_option("--a", a, "first calculator operand");
    sub->add_option("--b", b, "second calculator operand");
    sub->add_option("--n", n, "matrix order for matmul");
    sub->add_option("--size", size, "file size in bytes for file_create");
    sub->add_option("--count", count, "element count for sort/search");
    sub->add_option("--needle", needle, "value to search for");
    sub->add_option("--seed-a", seed_a, "seed for the left matrix");
    sub->add_option("--seed-b", seed_b, "seed for the right matrix");
    sub->add_option("--content-seed", content_seed, "seed for file contents");
    sub->add_option("--data-seed", data_seed, "seed for sort/search data");
  }

  // returns empty when no task flags were given at all
  std::string compose() const {
    if (!spec.empty()) return spec;
    if (task.empty()) return "";
    auto need = [&](const std::string& v, const char* what) {
      if (v.empty()) die_usage("task " + task + " needs " + what);
      return v;
    };
    if (task == "calc_add" || task == "calc_sub" || task == "calc_mul" ||
        task == "calc_div")
      return task + ":" + need(a, "--a") + "," + need(b, "--b");
    if (task == "matmul") {
      std::string s = task + ":" + need(n, "--n");
      if (!seed_a.empty() || !seed_b.empty())
        s += "," + (seed_a.empty() ? std::string("1") : seed_a) + "," +
             (seed_b.empty() ? std::string("2") : seed_b);
      return s;
    }
    if (task == "file_create") {
      std::string s = task + ":" + need(size, "--size");
      if (!content_seed.empty()) s += "," + content_seed;
      return s;
    }
    if (task == "sort") {
      std::string s = task + ":" + need(count, "--count");
      if (!data_seed.empty()) s += "," + data_seed;
      return s;
    }
    if (task == "search") {
      std::string s = task + ":" + need(count, "--count");
      if (!needle.empty())
        s += "," + (data_seed.empty() ? std::string("1") : data_seed) + "," + needle;
      else if (!data_seed.empty())
        s += "," + data_seed;
      return s;
    }
    die_usage("unknown task name: " + task);
  }
};

json config_to_json(const floff_config* cfg) {
  json j = json::object();
  for (const char* k = floff_config_next_key(cfg, nullptr); k;
       k = floff_config_next_key(cfg, k))
    j[k] = floff_config_get(cfg, k);
  return j;
}

void write_manifest(const floff_config* cfg, const std::string& out_dir,
                    const std::string& subcommand,
                    const std::vector<std::string>& artifacts) {
  std::filesystem::create_directories(out_dir);
  json seeds = json::object();
  for (const char* k = floff_config_next_key(cfg, nullptr); k;
       k = floff_config_next_key(cfg, k)) {
    std::string key(k);
    if (key == "seed" || (key.size() > 5 && key.rfind("_seed") == key.size() - 5))
      seeds[key] = floff_config_get(cfg, k);
  }
  json m{{"version", floff_version()},
         {"subcommand", subcommand},
         {"config", config_to_json(cfg)},
         {"seeds", seeds},
         {"artifacts", artifacts}};
  std::ofstream f(std::filesystem::path(out_dir) / "manifest.json",
                  std::ios::binary | std::ios::trunc);
  f << m.dump(2) << "\n";
  if (!f) die_runtime("cannot write manifest under " + out_dir);
  check(floff_config_write(
      cfg, (std::filesystem::path(out_dir) / "config.resolved").string().c_str()));
}

std::string path_under(const std::string& out_dir, const std::string& name) {
  return (std::filesystem::path(out_dir) / name).string();
}

void print_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::cout << f.rdbuf();
}

std::atomic<bool> g_stop{false};
void on_signal(int) { g_stop.store(true); }

void serve_until_signal(const char* site, const floff_config* cfg) {
  uint16_t port = 0;
  floff_service* svc = nullptr;
  check(floff_service_start(site, cfg, &port, &svc));
  std::cout << site << " service listening on port " << port << std::endl;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_stop.load()) {
    struct timespec ts {0, 100 * 1000 * 1000};
    nanosleep(&ts, nullptr);
  }
  check(floff_service_stop(svc));
  std::cout << site << " service stopped" << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"federated offloading toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand name

  std::string config_path;
  std::string out_dir = "out";
  std::string global_seed;
  app.add_option("--config", config_path, "key=value configuration file")
      ->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory (all artifacts land here)");
  app.add_option("--seed", global_seed, "master seed (overrides the config file)");

  std::list<KeyOpt> opts;

  CLI::App* fl_server = app.add_subcommand("fl-server", "run a federated server");
  CLI::App* fedoff_server =
      app.add_subcommand("fedoff-server", "run a federated server with data offload");
  for (CLI::App* sub : {fl_server, fedoff_server}) {
    add_key(sub, opts, "--endpoint", "endpoint", "host:port to bind");
    add_key(sub, opts, "--rounds", "rounds", "number of training rounds");
    add_key(sub, opts, "--clients", "clients", "number of clients to accept");
    add_key(sub, opts, "--fraction", "fraction", "participant fraction per round");
    add_key(sub, opts, "--accept-timeout", "accept_timeout_s", "client accept deadline (s)");
    add_key(sub, opts, "--round-timeout", "round_timeout_s", "per-round deadline (s)");
    add_key(sub, opts, "--arch", "arch", "model architecture, e.g. mlp:10,64,2");
    add_key(sub, opts, "--init-seed", "init_seed", "global model init seed");
    add_key(sub, opts, "--model-out", "model_out", "where to save the final model");
    add_key(sub, opts, "--power", "power_w", "device power draw (W)");
  }
  add_key(fedoff_server, opts, "--local-fraction", "local_fraction",
          "fraction of client data kept on-device");
  add_key(fedoff_server, opts, "--keys-dir", "keys_dir", "directory of *.key files");
  add_key(fedoff_server, opts, "--epochs", "epochs", "server-side training epochs");
  add_key(fedoff_server, opts, "--batch", "batch", "server-side batch size");
  add_key(fedoff_server, opts, "--lr", "lr", "server-side learning rate");
  add_key(fedoff_server, opts, "--optimizer", "optimizer", "adam or sgd");
  add_key(fedoff_server, opts, "--server-seed", "server_seed",
          "seed for server-side split and training");

  CLI::App* fl_client = app.add_subcommand("fl-client", "run a federated client");
  CLI::App* fedoff_client =
      app.add_subcommand("fedoff-client", "run a federated client with data offload");
  for (CLI::App* sub : {fl_client, fedoff_client}) {
    add_key(sub, opts, "--endpoint", "endpoint", "server host:port");
    add_key(sub, opts, "--data", "data", "training dataset CSV");
    add_key(sub, opts, "--epochs", "epochs", "local epochs per round");
    add_key(sub, opts, "--batch", "batch", "batch size");
    add_key(sub, opts, "--lr", "lr", "learning rate");
    add_key(sub, opts, "--optimizer", "optimizer", "adam or sgd");
    add_key(sub, opts, "--timeout", "timeout_s", "session timeout (s)");
    add_key(sub, opts, "--model-out", "model_out", "where to save the kept model");
    add_key(sub, opts, "--power", "power_w", "device power draw (W)");
  }
  add_key(fedoff_client, opts, "--local-fraction", "local_fraction",
          "fraction of data kept on-device");
  add_key(fedoff_client, opts, "--key", "key", "encryption key (base64url)");
  add_key(fedoff_client, opts, "--key-file", "key_file", "file holding the key");

  CLI::App* gen_data = app.add_subcommand("gen-data", "generate a labeled dataset");
  add_key(gen_data, opts, "--stage", "stage", "1 (task rows) or 2 (network rows)");
  add_key(gen_data, opts, "--n", "n", "number of rows");
  add_key(gen_data, opts, "--noise", "label_noise", "stage-1 label flip fraction");
  add_key(gen_data, opts, "--name", "name", "output file name under --out");

  CLI::App* decide = app.add_subcommand("decide", "route a task through the decision model");
  TaskFlags decide_task;
  decide_task.add_to(decide);
  add_key(decide, opts, "--pref", "pref", "user preference: local or remote");
  add_key(decide, opts, "--window", "window", "network snapshot window CSV");
  add_key(decide, opts, "--stage1-model", "stage1_model", "intensity classifier model");
  add_key(decide, opts, "--stage2-model", "stage2_model", "offload classifier model");

  CLI::App* exec = app.add_subcommand("exec", "execute a task locally or offloaded");
  TaskFlags exec_task;
  exec_task.add_to(exec);
  bool compare = false;
  exec->add_flag("--compare", compare, "price both local and offload paths");
  add_key(exec, opts, "--mode", "mode", "local, edge, cloud, or auto");
  add_key(exec, opts, "--pref", "pref", "user preference for auto mode");
  add_key(exec, opts, "--window", "window", "network window CSV for auto mode");
  add_key(exec, opts, "--stage1-model", "stage1_model", "intensity classifier model");
  add_key(exec, opts, "--stage2-model", "stage2_model", "offload classifier model");
  add_key(exec, opts, "--edge-endpoint", "edge_endpoint", "edge service host:port");
  add_key(exec, opts, "--cloud-endpoint", "cloud_endpoint", "cloud service host:port");
  add_key(exec, opts, "--sandbox", "sandbox_dir", "directory for created files");
  add_key(exec, opts, "--device-rate", "device_rate", "device work units per second");
  add_key(exec, opts, "--edge-speed", "edge_speed", "edge speedup over the device");
  add_key(exec, opts, "--cloud-speed", "cloud_speed", "cloud speedup over the device");
  add_key(exec, opts, "--link", "link_mbps", "link rate (Mbit/s)");
  add_key(exec, opts, "--msg-latency", "msg_latency_s", "per-hop message latency (s)");
  add_key(exec, opts, "--power", "power_w", "device power draw (W)");
  add_key(exec, opts, "--timeout", "timeout_s", "offload timeout (s)");

  CLI::App* edge_serve = app.add_subcommand("edge-serve", "run an edge task service");
  CLI::App* cloud_serve = app.add_subcommand("cloud-serve", "run a cloud task service");
  for (CLI::App* sub : {edge_serve, cloud_serve}) {
    add_key(sub, opts, "--endpoint", "endpoint", "host:port to bind");
    add_key(sub, opts, "--max-concurrent", "max_concurrent",
            "edge capacity before declining");
    add_key(sub, opts, "--max-matmul-order", "max_matmul_order",
            "largest matrix order the edge accepts (0 = no limit)");
    add_key(sub, opts, "--sandbox", "sandbox_dir", "directory for created files");
  }
  add_key(edge_serve, opts, "--cloud-endpoint", "cloud_endpoint",
          "where declined tasks are forwarded");

  CLI::App* simulate = app.add_subcommand("simulate", "queueing simulation sweep");
  add_key(simulate, opts, "--users", "users", "user count or comma list, e.g. 100,500");
  add_key(simulate, opts, "--link", "link_mbps", "link rate (Mbit/s)");
  add_key(simulate, opts, "--bits-min", "task_bits_min", "smallest task size (bits)");
  add_key(simulate, opts, "--bits-max", "task_bits_max", "largest task size (bits)");
  add_key(simulate, opts, "--rate", "per_user_rate", "arrivals per user per second");
  add_key(simulate, opts, "--service-rate", "service_rate", "server tasks per second");
  add_key(simulate, opts, "--mode", "mode", "mm1 or deterministic");
  add_key(simulate, opts, "--samples", "samples", "arrivals to simulate");
  add_key(simulate, opts, "--power", "power_w", "device power draw (W)");
  add_key(simulate, opts, "--preset", "preset", "named preset: paper-shape");

  CLI::App* report = app.add_subcommand("report", "render a run report as text");
  std::string report_path;
  report->add_option("path", report_path, "report JSON file")
      ->required()
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  // resolve the run configuration: file first, then flag overrides
  ConfigPtr cfg;
  if (!config_path.empty()) {
    floff_config* raw = nullptr;
    check(floff_config_load(config_path.c_str(), &raw));
    cfg.reset(raw);
  } else {
    cfg.reset(floff_config_new());
  }
  for (const KeyOpt& ko : opts)
    if (ko.opt->count() > 0)
      check(floff_config_set(cfg.get(), ko.key.c_str(), ko.value.c_str()));
  if (!global_seed.empty())
    check(floff_config_set(cfg.get(), "seed", global_seed.c_str()));

  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();

  if (sub == decide || sub == exec) {
    const TaskFlags& tf = sub == decide ? decide_task : exec_task;
    std::string spec = tf.compose();
    if (!spec.empty())
      check(floff_config_set(cfg.get(), "task_spec", spec.c_str()));
    if (!floff_config_get(cfg.get(), "task_spec"))
      die_usage("no task given: use --task/--spec or a task_spec config key");
  }
  if (sub == exec && compare)
    check(floff_config_set(cfg.get(), "compare", "true"));

  // subcommands that create files default the sandbox into the run directory
  if ((sub == exec || sub == edge_serve || sub == cloud_serve) &&
      !floff_config_get(cfg.get(), "sandbox_dir"))
    check(floff_config_set(cfg.get(), "sandbox_dir",
                           path_under(out_dir, "sandbox").c_str()));

  std::vector<std::string> artifacts;
  if (name == "fl-server" || name == "fedoff-server" || name == "fl-client" ||
      name == "fedoff-client") {
    artifacts.push_back(path_under(out_dir, "report.json"));
    std::string fallback =
        name.find("server") != std::string::npos ? "global.model" : "client.model";
    std::string model = cfg_get(cfg.get(), "model_out", fallback);
    if (!model.empty())
      artifacts.push_back(std::filesystem::path(model).is_absolute()
                              ? model
                              : path_under(out_dir, model));
  } else if (name == "gen-data") {
    std::string stage = cfg_get(cfg.get(), "stage", "1");
    artifacts.push_back(
        path_under(out_dir, cfg_get(cfg.get(), "name", "stage" + stage + ".csv")));
  } else if (name == "exec") {
    artifacts.push_back(path_under(out_dir, compare ? "costs.json" : "record.json"));
  } else if (name == "simulate") {
    artifacts.push_back(path_under(out_dir, "sim.csv"));
    artifacts.push_back(path_under(out_dir, "sim.json"));
  }
  write_manifest(cfg.get(), out_dir, name, artifacts);

  if (name == "fl-server") {
    check(floff_fl_server_run(cfg.get(), out_dir.c_str()));
    std::cout << "report: " << path_under(out_dir, "report.json") << std::endl;
  } else if (name == "fedoff-server") {
    check(floff_fedoff_server_run(cfg.get(), out_dir.c_str()));
    std::cout << "report: " << path_under(out_dir, "report.json") << std::endl;
  } else if (name == "fl-client") {
    check(floff_fl_client_run(cfg.get(), out_dir.c_str()));
    std::cout << "report: " << path_under(out_dir, "report.json") << std::endl;
  } else if (name == "fedoff-client") {
    check(floff_fedoff_client_run(cfg.get(), out_dir.c_str()));
    std::cout << "report: " << path_under(out_dir, "report.json") << std::endl;
  } else if (name == "gen-data") {
    int stage = static_cast<int>(cfg_get_u64(cfg.get(), "stage", 1));
    uint64_t n = cfg_get_u64(cfg.get(), "n", 1000);
    uint64_t seed = cfg_get_u64(cfg.get(), "seed", 0);
    double noise = cfg_get_f64(cfg.get(), "label_noise", 0.0);
    check(floff_generate_dataset(stage, n, seed, noise, artifacts[0].c_str()));
    std::cout << "wrote " << artifacts[0] << std::endl;
  } else if (name == "decide") {
    std::string spec = cfg_get(cfg.get(), "task_spec", "");
    std::string pref = cfg_get(cfg.get(), "pref", "local");
    const char* verdict = nullptr;
    check(floff_decide(cfg.get(), spec.c_str(), pref.c_str(), nullptr, &verdict));
    std::cout << verdict << std::endl;
  } else if (name == "exec") {
    std::string spec = cfg_get(cfg.get(), "task_spec", "");
    if (compare) {
      check(floff_task_compare(cfg.get(), spec.c_str(), artifacts[0].c_str()));
    } else {
      std::string mode = cfg_get(cfg.get(), "mode", "local");
      check(floff_task_exec(cfg.get(), spec.c_str(), mode.c_str(),
                            artifacts[0].c_str()));
    }
    print_file(artifacts[0]);
  } else if (name == "edge-serve") {
    serve_until_signal("edge", cfg.get());
  } else if (name == "cloud-serve") {
    serve_until_signal("cloud", cfg.get());
  } else if (name == "simulate") {
    check(floff_simulate(cfg.get(), artifacts[0].c_str(), artifacts[1].c_str()));
    print_file(artifacts[0]);
  } else if (name == "report") {
    char* text = nullptr;
    check(floff_report_render(report_path.c_str(), &text));
    std::cout << text;
    floff_buffer_free(text);
  }
  return 0;
}
