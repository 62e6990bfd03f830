#include <doctest.h>

#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedadg/protocol.hpp"
#include "fedadg/util.hpp"

using namespace fedadg;

namespace {

// Small everything: these tests exercise protocol mechanics, not learning.
TrainingParams small_params() {
  TrainingParams p;
  p.e0 = 1;
  p.e1 = 1;
  p.batch_size = 16;
  p.feature_dim = 8;
  p.rp_dim = 4;
  p.noise_dim = 4;
  p.hidden_dim = 16;
  return p;
}

DomainDataset small_domain(double angle, std::uint64_t seed,
                           std::size_t samples = 60) {
  DomainSpec spec;
  spec.angle_deg = angle;
  spec.samples = samples;
  spec.seed = seed;
  return generate_domain(spec, static_cast<int>(angle / 15.0));
}

std::vector<std::string> segment_names(const ParameterVector& pv) {
  std::vector<std::string> names;
  for (const auto& seg : pv.segments()) names.push_back(seg.name);
  return names;
}

ParameterSegment lone_segment(std::string name) {
  ParameterSegment seg;
  seg.name = std::move(name);
  seg.shape = {2};
  seg.values = {0.5, -0.5};
  return seg;
}

}  // namespace

TEST_CASE("mode names") {
  CHECK(run_mode_name(RunMode::fedadg) == "fedadg");
  CHECK(run_mode_name(RunMode::fedavg) == "fedavg");
  CHECK(reference_mode_name(ReferenceMode::adaptive) == "adaptive");
  CHECK(reference_mode_name(ReferenceMode::laplace) == "laplace");
}

TEST_CASE("federated segment whitelist") {
  CHECK(is_federated_segment("w_f.l1.W"));
  CHECK(is_federated_segment("w_c.out.b"));
  CHECK(is_federated_segment("w_g.l2.W"));
  CHECK(!is_federated_segment("w_d.l1.W"));
  CHECK(!is_federated_segment("w_d.rp"));
  CHECK(!is_federated_segment("samples"));
  CHECK(!is_federated_segment("w_f"));  // bare prefix without a dot path
}

TEST_CASE("round message wire round trip") {
  RoundMessage msg;
  msg.direction = RoundMessage::Direction::client_to_server;
  msg.round = 17;
  msg.params.add(lone_segment("w_f.l1.W"));
  msg.params.add(lone_segment("w_g.l2.b"));

  std::vector<std::uint8_t> wire = msg.serialize();
  RoundMessage back = RoundMessage::deserialize(wire.data(), wire.size());
  CHECK(back.direction == RoundMessage::Direction::client_to_server);
  CHECK(back.round == 17);
  CHECK(back.params == msg.params);

  CHECK_THROWS_AS(RoundMessage::deserialize(wire.data(), 4),
                  std::runtime_error);
  wire[0] = 9;  // neither direction value
  CHECK_THROWS_AS(RoundMessage::deserialize(wire.data(), wire.size()),
                  std::runtime_error);
}

TEST_CASE("discriminator weights cannot cross the wire") {
  RoundMessage msg;
  msg.params.add(lone_segment("w_d.l1.W"));
  CHECK_THROWS_AS(msg.serialize(), std::runtime_error);

  // Hand-built bytes that smuggle w_d past serialize() must still be
  // rejected on receipt.
  ParameterVector contraband;
  contraband.add(lone_segment("w_f.l1.W"));
  contraband.add(lone_segment("w_d.l1.W"));
  std::vector<std::uint8_t> wire;
  wire.push_back(0);  // direction
  for (int i = 0; i < 8; ++i) wire.push_back(0);  // round
  std::vector<std::uint8_t> body = serialize_segments(contraband);
  wire.insert(wire.end(), body.begin(), body.end());
  CHECK_THROWS_AS(RoundMessage::deserialize(wire.data(), wire.size()),
                  std::runtime_error);
}

TEST_CASE("server_init layout and determinism") {
  TrainingParams p = small_params();
  ServerState a = server_init(p, 3, 42);
  ServerState b = server_init(p, 3, 42);
  CHECK(a.global == b.global);
  CHECK(a.round == 0);
  CHECK(a.num_clients == 3);
  CHECK(segment_names(a.global) ==
        std::vector<std::string>{"w_f.l1.W", "w_f.l1.b", "w_f.l2.W",
                                 "w_f.l2.b", "w_c.out.W", "w_c.out.b",
                                 "w_g.l1.W", "w_g.l1.b", "w_g.l2.W",
                                 "w_g.l2.b"});

  ServerState c = server_init(p, 3, 43);
  CHECK(!(a.global == c.global));

  p.mode = RunMode::fedavg;
  ServerState avg = server_init(p, 3, 42);
  CHECK(segment_names(avg.global) ==
        std::vector<std::string>{"w_f.l1.W", "w_f.l1.b", "w_f.l2.W",
                                 "w_f.l2.b", "w_c.out.W", "w_c.out.b"});

  CHECK_THROWS_AS(server_init(p, 1, 42), std::invalid_argument);
}

TEST_CASE("make_client rejects an empty training split") {
  DomainDataset empty;
  empty.input_dim = 2;
  empty.num_classes = 2;
  empty.xs = {0.0, 0.0};
  empty.ys = {0};
  empty.test_idx = {0};
  CHECK_THROWS_AS(make_client(0, empty, small_params(), 1),
                  std::invalid_argument);
}

TEST_CASE("noise batch labels preserve the real label histogram") {
  std::vector<int> real{0, 1, 1, 2, 0, 1};
  Rng r1(3), r2(3);
  std::vector<int> a = noise_batch_labels(r1, real);
  std::vector<int> b = noise_batch_labels(r2, real);
  CHECK(a == b);  // same stream, same shuffle

  std::multiset<int> ha(real.begin(), real.end()), hb(a.begin(), a.end());
  CHECK(ha == hb);

  std::vector<int> constant(8, 1);
  CHECK(noise_batch_labels(r1, constant) == constant);
}

TEST_CASE("zero-epoch client update echoes the broadcast bit for bit") {
  for (RunMode mode : {RunMode::fedadg, RunMode::fedavg}) {
    TrainingParams p = small_params();
    p.mode = mode;
    p.e0 = 0;
    p.e1 = 0;
    DomainDataset data = small_domain(0.0, 5);
    ServerState server = server_init(p, 2, 9);
    ClientState st = make_client(0, data, p, 9);
    ClientReport rep = client_update(st, server.global, p, 0);
    CHECK(rep.params == server.global);
    CHECK(std::isnan(rep.l_err));  // no steps, no loss to report
  }
}

TEST_CASE("client updates are a deterministic function of state and input") {
  TrainingParams p = small_params();
  DomainDataset data = small_domain(15.0, 6);
  ServerState server = server_init(p, 2, 11);

  ClientState a = make_client(0, data, p, 11);
  ClientState b = make_client(0, data, p, 11);
  ClientReport ra = client_update(a, server.global, p, 0);
  ClientReport rb = client_update(b, server.global, p, 0);
  CHECK(ra.params == rb.params);
  CHECK(ra.l_err == rb.l_err);
  CHECK(ra.l_adv_d == rb.l_adv_d);

  // A second round from the same state advances the streams: different update.
  ClientReport ra2 = client_update(a, server.global, p, 1);
  CHECK(!(ra2.params == ra.params));
}

namespace {

// Tracks which component a step touched by diffing parameter snapshots.
struct SnapshotHook : TraceHook {
  ParameterVector f, c, g, d;
  bool has_gan = false;
  std::vector<std::pair<std::string, std::set<std::string>>> events;

  void capture(const ClientState& st) {
    f = st.f.flatten();
    c = st.c.flatten();
    has_gan = st.has_gan;
    if (has_gan) {
      g = st.g.flatten();
      d = st.d.flatten();
    }
  }
  void on_client_begin(const ClientState& st) override { capture(st); }
  void on_step(const ClientState& st, std::string_view step) override {
    std::set<std::string> changed;
    if (!(st.f.flatten() == f)) changed.insert("f");
    if (!(st.c.flatten() == c)) changed.insert("c");
    if (has_gan) {
      if (!(st.g.flatten() == g)) changed.insert("g");
      if (!(st.d.flatten() == d)) changed.insert("d");
    }
    events.emplace_back(std::string(step), std::move(changed));
    capture(st);
  }
};

}  // namespace

TEST_CASE("each optimizer step touches exactly its own component") {
  TrainingParams p = small_params();
  DomainDataset data = small_domain(0.0, 8);
  ServerState server = server_init(p, 2, 13);
  ClientState st = make_client(0, data, p, 13);

  SnapshotHook hook;
  client_update(st, server.global, p, 0, &hook);

  // 42 train samples, batch 16 -> 3 batches; e0 = e1 = 1.
  std::map<std::string, int> step_count;
  for (const auto& [step, changed] : hook.events) {
    ++step_count[step];
    if (step == "c7") {
      CHECK(changed == std::set<std::string>{"d"});
    } else if (step == "c8") {
      CHECK(changed == std::set<std::string>{"g"});
    } else {
      REQUIRE((step == "c2c3" || step == "c5"));
      CHECK(!changed.empty());
      CHECK(changed.count("g") == 0);
      CHECK(changed.count("d") == 0);
    }
  }
  CHECK(step_count["c2c3"] == 3);
  CHECK(step_count["c5"] == 3);
  CHECK(step_count["c7"] == 3);
  CHECK(step_count["c8"] == 3);
}

TEST_CASE("parameter vector aggregation arithmetic") {
  ParameterVector a, b;
  a.add({"w_f.l1.W", {2}, {1.0, 2.0}});
  b.add({"w_f.l1.W", {2}, {3.0, 4.0}});
  a.accumulate(b);
  a.scale_values(0.5);
  CHECK(a.at("w_f.l1.W").values == std::vector<double>{2.0, 3.0});

  ParameterVector odd;
  odd.add({"w_f.l1.b", {2}, {0.0, 0.0}});
  CHECK(!a.same_layout(odd));
  CHECK_THROWS_AS(a.accumulate(odd), std::runtime_error);
}

TEST_CASE("aggregating identical uploads is a bit-exact fixed point") {
  TrainingParams p = small_params();
  p.e0 = 0;
  p.e1 = 0;  // every client echoes the broadcast
  DomainDataset d0 = small_domain(0.0, 21), d1 = small_domain(15.0, 22);
  ServerState server = server_init(p, 2, 33);
  const ParameterVector before = server.global;

  std::vector<ClientState> clients;
  clients.push_back(make_client(0, d0, p, 33));
  clients.push_back(make_client(1, d1, p, 33));
  run_round(server, clients, p);

  CHECK(server.global == before);  // (w + w) / 2 == w exactly
  CHECK(server.round == 1);
  REQUIRE(server.history.size() == 1);
  CHECK(server.history.back() == before);
}

TEST_CASE("client array order does not affect the aggregate") {
  TrainingParams p = small_params();
  std::vector<DomainDataset> data;
  data.push_back(small_domain(0.0, 41));
  data.push_back(small_domain(15.0, 42));
  data.push_back(small_domain(30.0, 43));

  auto run_with_order = [&](std::vector<int> ids) {
    ServerState server = server_init(p, 3, 55);
    std::vector<ClientState> clients;
    for (int id : ids) {
      clients.push_back(
          make_client(id, data[static_cast<std::size_t>(id)], p, 55));
    }
    run_round(server, clients, p);
    return server.global;
  };

  CHECK(run_with_order({0, 1, 2}) == run_with_order({2, 0, 1}));
}

TEST_CASE("sequential and concurrent rounds agree bit for bit") {
  TrainingParams p = small_params();
  std::vector<DomainDataset> data;
  data.push_back(small_domain(0.0, 61));
  data.push_back(small_domain(15.0, 62));
  data.push_back(small_domain(30.0, 63));

  auto run_rounds = [&](bool concurrent) {
    ServerState server = server_init(p, 3, 77);
    std::vector<ClientState> clients;
    for (int id = 0; id < 3; ++id) {
      clients.push_back(
          make_client(id, data[static_cast<std::size_t>(id)], p, 77));
    }
    run_round(server, clients, p, concurrent);
    run_round(server, clients, p, concurrent);
    return server.global;
  };

  CHECK(run_rounds(false) == run_rounds(true));
}

TEST_CASE("run_round guards") {
  TrainingParams p = small_params();
  DomainDataset d0 = small_domain(0.0, 81), d1 = small_domain(15.0, 82);
  ServerState server = server_init(p, 2, 3);
  std::vector<ClientState> one;
  one.push_back(make_client(0, d0, p, 3));
  CHECK_THROWS_AS(run_round(server, one, p), std::invalid_argument);

  one.push_back(make_client(1, d1, p, 3));
  SnapshotHook hook;
  CHECK_THROWS_AS(run_round(server, one, p, /*concurrent=*/true, &hook),
                  std::logic_error);
}

TEST_CASE("fedavg rounds carry no generator and no adversarial losses") {
  TrainingParams p = small_params();
  p.mode = RunMode::fedavg;
  DomainDataset d0 = small_domain(0.0, 91), d1 = small_domain(15.0, 92);
  ServerState server = server_init(p, 2, 7);
  std::vector<ClientState> clients;
  clients.push_back(make_client(0, d0, p, 7));
  clients.push_back(make_client(1, d1, p, 7));

  auto reports = run_round(server, clients, p);
  for (const auto& rep : reports) {
    for (const auto& seg : rep.params.segments()) {
      CHECK(!seg.name.starts_with("w_g."));
    }
    CHECK(std::isfinite(rep.l_err));
    CHECK(std::isnan(rep.l_adv_f));
    CHECK(std::isnan(rep.l_adv_d));
    CHECK(std::isnan(rep.l_adv_g));
  }
  // Removing G and D leaves Steps c2-c3 only, so just the e0 budget runs.
  CHECK(clients[0].epochs_run == p.e0);
}

TEST_CASE("fixed references train D but upload the generator untouched") {
  TrainingParams p = small_params();
  p.reference = ReferenceMode::gaussian;
  CHECK(p.has_gan());
  CHECK(!p.trains_generator());

  DomainDataset data = small_domain(0.0, 101);
  ServerState server = server_init(p, 2, 19);
  ClientState st = make_client(0, data, p, 19);
  const ParameterVector d_before = st.d.flatten();

  ClientReport rep = client_update(st, server.global, p, 0);
  for (const char* name : {"w_g.l1.W", "w_g.l1.b", "w_g.l2.W", "w_g.l2.b"}) {
    CHECK(rep.params.at(name).values == server.global.at(name).values);
  }
  CHECK(!(st.d.flatten() == d_before));
  CHECK(std::isfinite(rep.l_adv_d));
  CHECK(std::isfinite(rep.l_adv_g));  // reported for diagnostics, not trained
}

TEST_CASE("weighted aggregation responds to client dataset sizes") {
  TrainingParams p = small_params();
  p.mode = RunMode::fedavg;
  p.e1 = 0;
  DomainDataset d0 = small_domain(0.0, 111, 60);
  DomainDataset d1 = small_domain(15.0, 112, 120);

  auto aggregate = [&](bool weighted) {
    TrainingParams q = p;
    q.weighted_aggregation = weighted;
    ServerState server = server_init(q, 2, 23);
    std::vector<ClientState> clients;
    clients.push_back(make_client(0, d0, q, 23));
    clients.push_back(make_client(1, d1, q, 23));
    run_round(server, clients, q);
    return server.global;
  };

  CHECK(!(aggregate(true) == aggregate(false)));
}

TEST_CASE("non-finite training aborts with coordinates") {
  TrainingParams p = small_params();
  DomainDataset data = small_domain(0.0, 121);
  ServerState server = server_init(p, 2, 29);
  ClientState st = make_client(0, data, p, 29);

  ParameterVector poisoned = server.global;
  poisoned.scale_values(1e300);  // overflow on the first forward pass
  try {
    client_update(st, poisoned, p, 4);
    FAIL("expected a non-finite abort");
  } catch (const std::runtime_error& e) {
    const std::string what = e.what();
    CHECK(what.find("client 0") != std::string::npos);
    CHECK(what.find("round 4") != std::string::npos);
    CHECK(what.find("c2c3") != std::string::npos);
  }
}

TEST_CASE("round and epoch counters are monotone") {
  TrainingParams p = small_params();
  DomainDataset d0 = small_domain(0.0, 131), d1 = small_domain(15.0, 132);
  ServerState server = server_init(p, 2, 31);
  std::vector<ClientState> clients;
  clients.push_back(make_client(0, d0, p, 31));
  clients.push_back(make_client(1, d1, p, 31));

  for (std::uint64_t r = 0; r < 3; ++r) {
    CHECK(server.round == r);
    run_round(server, clients, p);
    CHECK(clients[0].epochs_run == (r + 1) * (p.e0 + p.e1));
  }
  CHECK(server.round == 3);
}
