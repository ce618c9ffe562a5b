#include <chrono>
#include <filesystem>
#include <future>
#include <set>
#include <stdexcept>
#include <thread>

#include "doctest.h"
#include "floff/fernet.hpp"
#include "floff/fl.hpp"
#include "floff/model.hpp"
#include "floff/net.hpp"

using namespace floff;

namespace {

struct PortGate {
  std::promise<uint16_t> promise;
  std::future<uint16_t> future = promise.get_future();
  std::string endpoint() {
    if (future.wait_for(std::chrono::seconds(30)) != std::future_status::ready)
      throw std::runtime_error("server never reported a listening port");
    return "127.0.0.1:" + std::to_string(future.get());
  }
};

FLServerOptions tiny_server(int clients, int rounds, PortGate& gate) {
  FLServerOptions o;
  o.endpoint = "127.0.0.1:0";
  o.rounds = rounds;
  o.expected_clients = clients;
  o.accept_timeout_s = 15.0;
  o.round_timeout_s = 30.0;
  o.arch = ArchSpec::mlp({uint16_t(kStage1Features), 16, 2});
  o.init_seed = 1;
  o.seed = 7;
  o.on_listening = [&gate](uint16_t p) { gate.promise.set_value(p); };
  return o;
}

FLClientOptions tiny_client(const std::string& endpoint, uint64_t seed) {
  FLClientOptions o;
  o.endpoint = endpoint;
  o.train.epochs = 2;
  o.train.batch_size = 32;
  o.train.seed = seed;
  o.seed = seed;
  o.timeout_s = 30.0;
  return o;
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_SUITE_BEGIN("fl");

TEST_CASE("select_participants: deterministic floor-clamped subsets") {
  std::vector<uint32_t> ids{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  auto all = select_participants(ids, 1.0, 5);
  CHECK(all == ids);
  auto half = select_participants(ids, 0.5, 5);
  CHECK(half.size() == 5);
  CHECK(std::is_sorted(half.begin(), half.end()));
  std::set<uint32_t> uniq(half.begin(), half.end());
  CHECK(uniq.size() == 5);
  CHECK(select_participants(ids, 0.5, 5) == half);
  // the round seed drives selection: several seeds give several subsets
  std::set<std::vector<uint32_t>> seen;
  for (uint64_t r = 1; r <= 10; r++) seen.insert(select_participants(ids, 0.5, r));
  CHECK(seen.size() > 1);
  // fraction small enough to floor to zero still yields one participant
  auto one = select_participants(ids, 0.05, 3);
  CHECK(one.size() == 1);
  std::vector<uint32_t> single{4};
  CHECK(select_participants(single, 1.0, 9) == single);
  CHECK_THROWS_AS(select_participants(ids, 0.0, 1), Error);
  CHECK_THROWS_AS(select_participants(ids, 1.5, 1), Error);
}

TEST_CASE("timing identities are exact by construction") {
  TimingReport t;
  t.init_s = 0.1;
  t.tr_s = 0.2;
  t.loc_s = 0.3;
  t.exm_s = 0.05;
  t.ser_s = 0.007;
  t.agg_s = 0.003;
  t.crypt_s = 0.01;
  CHECK(t.train_s() == 0.1 + 0.2 + 0.3 + 0.05 + 0.007 + 0.003);
  CHECK(t.total_s() == t.train_s() + 0.01);
  CHECK(total_time(t) == t.total_s());
  TimingReport bad = t;
  bad.loc_s = -1;
  CHECK_THROWS_AS(total_time(bad), Error);
}

TEST_CASE("energy is the exact product of power and time") {
  CHECK(energy_joules(5.0, 0.46) == 5.0 * 0.46);
  CHECK(energy_joules(5.0, 23.476) == 117.38);
  CHECK(energy_joules(0.0, 100.0) == 0.0);
  CHECK_THROWS_AS(energy_joules(-1.0, 1.0), Error);
  CHECK_THROWS_AS(energy_joules(5.0, -0.1), Error);
}

TEST_CASE("two-client federation completes and is reproducible") {
  Dataset d1 = generate_stage1_dataset(300, 101);
  Dataset d2 = generate_stage1_dataset(300, 202);

  auto run_once = [&](const std::string& model_path) {
    PortGate gate;
    FLServerOptions so;
    auto server = std::async(std::launch::async, [&] {
      so = tiny_server(2, 3, gate);
      so.model_out = model_path;
      return fl_server_run(so);
    });
    std::string ep = gate.endpoint();
    auto c1 = std::async(std::launch::async,
                         [&] { return fl_client_run(d1, tiny_client(ep, 11)); });
    auto c2 = std::async(std::launch::async,
                         [&] { return fl_client_run(d2, tiny_client(ep, 22)); });
    ClientRunResult r1 = c1.get(), r2 = c2.get();
    ServerRunResult rs = server.get();
    return std::make_tuple(rs, r1, r2);
  };

  auto path_a = temp_path("fl_global_a.model");
  auto path_b = temp_path("fl_global_b.model");
  auto [sa, a1, a2] = run_once(path_a);
  auto [sb, b1, b2] = run_once(path_b);

  REQUIRE(sa.rounds.size() == 3);
  for (int i = 0; i < 3; i++) {
    CHECK(sa.rounds[i].index == i + 1);
    CHECK(sa.rounds[i].participant_ids == std::vector<uint32_t>{0, 1});
    CHECK(sa.rounds[i].received_model_count == 2);
    CHECK(sa.rounds[i].aggregate_count == 2);
    CHECK_FALSE(sa.rounds[i].accuracy.has_value());
    CHECK(sa.rounds[i].aggregated_digest == sb.rounds[i].aggregated_digest);
  }
  CHECK(sa.final_digest == sb.final_digest);
  CHECK(sa.final_digest == weights_digest(sa.final_model));
  CHECK(read_file(path_a) == read_file(path_b));
  CHECK(weights_digest(load_model_file(path_a)) == sa.final_digest);

  // clients trained every round and retained their best model
  std::set<uint32_t> ids{a1.client_id, a2.client_id};
  CHECK(ids == std::set<uint32_t>{0, 1});
  CHECK(a1.rounds.size() == 3);
  CHECK(a2.rounds.size() == 3);
  CHECK(a1.best_accuracy >= 0.0);
  // the same dataset + seed retains the same model whichever id it was dealt
  CHECK(weights_digest(a1.retained_model) == weights_digest(b1.retained_model));
  CHECK(weights_digest(a2.retained_model) == weights_digest(b2.retained_model));

  // timing identities hold on every emitted report
  for (const TimingReport* t : {&sa.timing, &a1.timing, &a2.timing}) {
    CHECK(t->train_s() ==
          t->init_s + t->tr_s + t->loc_s + t->exm_s + t->ser_s + t->agg_s);
    CHECK(t->total_s() == t->train_s() + t->crypt_s);
  }
  CHECK(sa.energy.total_j == energy_joules(sa.energy.power_w, sa.timing.total_s()));
  CHECK(a1.energy.total_j == energy_joules(a1.energy.power_w, a1.timing.total_s()));
  std::filesystem::remove(path_a);
  std::filesystem::remove(path_b);
}

TEST_CASE("participant fraction selects a strict subset each round") {
  Dataset data = generate_stage1_dataset(200, 55);
  PortGate gate;
  auto server = std::async(std::launch::async, [&] {
    FLServerOptions so = tiny_server(3, 4, gate);
    so.participant_fraction = 0.5;  // floor(0.5*3) = 1 participant per round
    return fl_server_run(so);
  });
  std::string ep = gate.endpoint();
  std::vector<std::future<ClientRunResult>> clients;
  for (uint64_t s : {1, 2, 3})
    clients.push_back(std::async(std::launch::async, [&, s] {
      return fl_client_run(data, tiny_client(ep, s));
    }));
  for (auto& c : clients) c.get();
  ServerRunResult rs = server.get();
  REQUIRE(rs.rounds.size() == 4);
  for (const auto& r : rs.rounds) {
    CHECK(r.participant_ids.size() == 1);
    CHECK(r.aggregate_count == 1);
  }
}

TEST_CASE("a client dying mid-round shrinks later rounds instead of crashing") {
  Dataset data = generate_stage1_dataset(200, 77);
  PortGate gate;
  auto server = std::async(std::launch::async, [&] {
    return fl_server_run(tiny_server(2, 3, gate));
  });
  std::string ep = gate.endpoint();
  auto [host, port] = parse_endpoint(ep);

  // fake client: completes the handshake, reads the first global, then dies
  auto fake = std::async(std::launch::async, [&] {
    Socket s = tcp_connect(host, port, 10.0);
    s.set_recv_timeout(10.0);
    s.send_msg(MsgType::Hello, Bytes{});
    Message w = s.recv_msg();
    REQUIRE(w.type == MsgType::Welcome);
    Message g = s.recv_msg();
    REQUIRE(g.type == MsgType::GlobalWeights);
    // vanish without uploading
  });
  auto real = std::async(std::launch::async, [&] {
    return fl_client_run(data, tiny_client(ep, 5));
  });
  fake.get();
  ClientRunResult rc = real.get();
  ServerRunResult rs = server.get();

  REQUIRE(rs.rounds.size() == 3);
  CHECK(rs.rounds[0].participant_ids.size() == 2);  // both were selected
  CHECK(rs.rounds[0].received_model_count == 1);    // only one delivered
  CHECK(rs.rounds[0].aggregate_count == 1);
  CHECK(rs.rounds[1].participant_ids == std::vector<uint32_t>{rc.client_id});
  CHECK(rs.rounds[2].participant_ids == std::vector<uint32_t>{rc.client_id});
  CHECK(rc.rounds.size() == 3);
}

TEST_CASE("a server alone with no surviving client aborts the round") {
  PortGate gate;
  auto server = std::async(std::launch::async, [&] {
    FLServerOptions so = tiny_server(1, 2, gate);
    so.round_timeout_s = 2.0;
    return fl_server_run(so);
  });
  std::string ep = gate.endpoint();
  auto [host, port] = parse_endpoint(ep);
  {
    Socket s = tcp_connect(host, port, 10.0);
    s.set_recv_timeout(10.0);
    s.send_msg(MsgType::Hello, Bytes{});
    Message w = s.recv_msg();
    REQUIRE(w.type == MsgType::Welcome);
    // die before round 1
  }
  try {
    server.get();
    FAIL("expected an aborted run");
  } catch (const Error& e) {
    CHECK(e.code() == Err::runtime);
  }
}

TEST_CASE("failed handshakes reopen the accept slot") {
  Dataset data = generate_stage1_dataset(200, 31);
  PortGate gate;
  auto server = std::async(std::launch::async, [&] {
    return fl_server_run(tiny_server(1, 1, gate));
  });
  std::string ep = gate.endpoint();
  auto [host, port] = parse_endpoint(ep);
  {
    // connects but never says hello properly
    Socket junk = tcp_connect(host, port, 10.0);
    junk.send_msg(MsgType::Release, Bytes{});
  }
  ClientRunResult rc = fl_client_run(data, tiny_client(ep, 9));
  ServerRunResult rs = server.get();
  CHECK(rs.rounds.size() == 1);
  CHECK(rc.client_id == 0);  // ids are dense over completed handshakes
}

TEST_CASE("fedoff with full local fraction is bitwise-identical to plain fl") {
  Dataset d1 = generate_stage1_dataset(250, 401);
  Dataset d2 = generate_stage1_dataset(250, 402);

  auto run = [&](bool fedoff) {
    PortGate gate;
    auto server = std::async(std::launch::async, [&] {
      FLServerOptions so = tiny_server(2, 3, gate);
      so.fedoff = fedoff;
      so.local_fraction = 1.0;
      so.server_seed = 77;
      return fl_server_run(so);
    });
    std::string ep = gate.endpoint();
    auto mk = [&](const Dataset& d, uint64_t seed) {
      return std::async(std::launch::async, [&, seed] {
        FLClientOptions co = tiny_client(ep, seed);
        co.fedoff = fedoff;
        co.local_fraction = 1.0;
        return fl_client_run(d, co);
      });
    };
    auto c1 = mk(d1, 61), c2 = mk(d2, 62);
    c1.get();
    c2.get();
    return server.get();
  };

  ServerRunResult plain = run(false);
  ServerRunResult offload_zero = run(true);
  CHECK(plain.final_digest == offload_zero.final_digest);
  REQUIRE(plain.rounds.size() == offload_zero.rounds.size());
  for (size_t i = 0; i < plain.rounds.size(); i++) {
    CHECK(plain.rounds[i].aggregated_digest == offload_zero.rounds[i].aggregated_digest);
    CHECK(offload_zero.rounds[i].aggregate_count == 2);  // no server candidate
  }
  CHECK(serialize_weights(plain.final_model) ==
        serialize_weights(offload_zero.final_model));
}

TEST_CASE("fedoff shards reach the server and add a candidate model") {
  Dataset d1 = generate_stage1_dataset(400, 501);
  Dataset d2 = generate_stage1_dataset(400, 502);
  std::string key = fernet_generate_key();
  auto keys_dir = std::filesystem::temp_directory_path() / "floff_keys_test";
  std::filesystem::remove_all(keys_dir);
  std::filesystem::create_directories(keys_dir);
  write_file((keys_dir / "clients.key").string(), key + "\n");

  PortGate gate;
  auto server = std::async(std::launch::async, [&] {
    FLServerOptions so = tiny_server(2, 2, gate);
    so.fedoff = true;
    so.local_fraction = 0.5;
    so.keys_dir = keys_dir.string();
    so.server_train.epochs = 2;
    so.server_train.batch_size = 32;
    so.server_seed = 99;
    return fl_server_run(so);
  });
  std::string ep = gate.endpoint();
  auto mk = [&](const Dataset& d, uint64_t seed) {
    return std::async(std::launch::async, [&, seed] {
      FLClientOptions co = tiny_client(ep, seed);
      co.fedoff = true;
      co.local_fraction = 0.5;
      co.key = key;
      return fl_client_run(d, co);
    });
  };
  auto c1 = mk(d1, 71), c2 = mk(d2, 72);
  ClientRunResult r1 = c1.get(), r2 = c2.get();
  ServerRunResult rs = server.get();

  REQUIRE(rs.rounds.size() == 2);
  for (const auto& r : rs.rounds) {
    CHECK(r.received_model_count == 2);
    CHECK(r.aggregate_count == 3);  // two clients + the server candidate
    CHECK(r.accuracy.has_value());
    CHECK(r.loss.has_value());
  }
  CHECK(rs.timing.crypt_s > 0.0);
  CHECK(r1.timing.crypt_s > 0.0);
  CHECK(r2.timing.crypt_s > 0.0);
  std::filesystem::remove_all(keys_dir);
}

TEST_CASE("fedoff with a wrong key kills the run cleanly") {
  Dataset d1 = generate_stage1_dataset(200, 601);
  std::string client_key = fernet_generate_key();
  auto keys_dir = std::filesystem::temp_directory_path() / "floff_badkeys_test";
  std::filesystem::remove_all(keys_dir);
  std::filesystem::create_directories(keys_dir);
  write_file((keys_dir / "other.key").string(), fernet_generate_key());

  PortGate gate;
  auto server = std::async(std::launch::async, [&] {
    FLServerOptions so = tiny_server(1, 2, gate);
    so.fedoff = true;
    so.local_fraction = 0.5;
    so.keys_dir = keys_dir.string();
    so.server_seed = 1;
    return fl_server_run(so);
  });
  std::string ep = gate.endpoint();
  FLClientOptions co = tiny_client(ep, 5);
  co.fedoff = true;
  co.local_fraction = 0.5;
  co.key = client_key;
  try {
    fl_client_run(d1, co);
    FAIL("client should be rejected");
  } catch (const Error& e) {
    CHECK(e.code() == Err::crypto_invalid);
  }
  CHECK_THROWS_AS(server.get(), Error);
  std::filesystem::remove_all(keys_dir);
}

TEST_CASE("client option validation rejects bad inputs before any io") {
  auto code_of = [](const Dataset& d, const FLClientOptions& o) {
    try {
      fl_client_run(d, o);
    } catch (const Error& e) {
      return e.code();
    }
    return Err::runtime;
  };
  Dataset empty;
  FLClientOptions co = tiny_client("127.0.0.1:1", 1);
  co.timeout_s = 1.0;  // nothing below should ever reach the network
  CHECK(code_of(empty, co) == Err::invalid_argument);
  Dataset small = generate_stage1_dataset(50, 1);
  co.fedoff = true;
  co.local_fraction = 0.0;
  CHECK(code_of(small, co) == Err::invalid_argument);
  co.local_fraction = 0.5;
  co.key = "";  // shard offload requires a key
  CHECK(code_of(small, co) == Err::invalid_argument);
}

TEST_SUITE_END();
