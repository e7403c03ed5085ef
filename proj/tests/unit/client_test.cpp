// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#include "lgrid/client/client.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "lgrid/bench/bench.hpp"
#include "lgrid/server/servers.hpp"
#include "support/fixtures.hpp"

namespace lgrid::client {
namespace {

using namespace std::chrono_literals;
using testing::TempDir;
using testing::TestPki;

struct EndToEnd : ::testing::Test {
  void SetUp() override {
    repo = std::make_unique<server::RepositoryServer>(pki_.trust, net::TlsIdentity{pki_.host.cert, pki_.host.key});
    repo->bind("127.0.0.1", 0);
    repo->start();

    gateway::GatewayOptions o;
    o.state_root = root.path();
    o.trust = pki_.trust;
    o.executor = std::make_shared<jobs::ScriptedExecutor>(jobs::ScriptedConfig{20ms, {}});
    o.policy.add({"test", {"/C=IT/O=Test/*"},
                  {gateway::Operation::kSubmit, gateway::Operation::kStatus, gateway::Operation::kOutput,
                   gateway::Operation::kCancel}});
    net::ClientTls tls{pki_.trust, net::TlsIdentity{pki_.host.cert, pki_.host.key}};
    o.repository = [tls, port = repo->port()] {
      return net::open_channel("127.0.0.1", port, tls, std::string(server::kRepositoryPath));
    };
    gw = std::make_unique<server::GatewayServer>(std::move(o), net::TlsIdentity{pki_.host.cert, pki_.host.key});
    gw->bind("127.0.0.1", 0);
    gw->start();
  }
  void TearDown() override {
    gw->stop();
    repo->stop();
  }

  GatewayClient as(const pki::Identity& id) {
    return GatewayClient("localhost", gw->port(), {pki_.trust, net::TlsIdentity{id.cert, id.key}});
  }

  const TestPki& pki_ = TestPki::get();
  TempDir root;
  std::unique_ptr<server::RepositoryServer> repo;
  std::unique_ptr<server::GatewayServer> gw;
};

TEST_F(EndToEnd, DelegateSubmitWaitFetch) {
  auto c = as(pki_.alice);
  auto d = c.delegate(pki_.alice.cert, pki_.alice.key, 1h, pki_.host.cert.subject());
  EXPECT_EQ(d.token.size(), 32u);
  EXPECT_EQ(d.transcript.connection_count(), 1);
  EXPECT_EQ(d.transcript.round_trip_count(), 2);
  EXPECT_EQ(delegation::count_key_material(d.transcript, pki_.alice.key), 0u);

  auto ids = c.submit(R"(Executable = "/bin/echo"; Arguments = "hi there"; StdOutput = "o.txt";
                         InputSandbox = {"in.dat"};)",
                      {{"in.dat", "x"}});
  ASSERT_EQ(ids.size(), 1u);
  auto listed = c.list();
  ASSERT_EQ(listed.size(), 1u);
  EXPECT_EQ(listed[0].id, ids[0].id);
  auto st = c.status(ids[0].id, 10s);
  EXPECT_EQ(st.state, "DONE_OK");
  EXPECT_EQ(st.color, "green");
  EXPECT_EQ(st.history.size(), 6u);
  auto files = jobs::unpack(c.output(ids[0].uuid));
  ASSERT_EQ(files.size(), 1u);
  EXPECT_EQ(files[0], (jobs::SandboxEntry{"o.txt", "hi there\n"}));
  EXPECT_EQ(c.status(ids[0].uuid).state, "CLEARED");
  EXPECT_EQ(c.connection().connections_opened(), 1);
}

TEST_F(EndToEnd, ErrorsSurfaceAsApiErrors) {
  auto a = as(pki_.alice);
  try {
    a.list();
    FAIL();
  } catch (const ApiError& e) {
    EXPECT_EQ(e.status(), 401);
    EXPECT_EQ(e.code(), "invalid-token");
  }
  a.delegate(pki_.alice.cert, pki_.alice.key, 1h);
  auto id = a.submit(R"(Executable = "/bin/true";)").at(0).uuid;

  auto b = as(pki_.bob);
  b.delegate(pki_.bob.cert, pki_.bob.key, 1h);
  try {
    b.status(id);
    FAIL();
  } catch (const ApiError& e) {
    EXPECT_EQ(e.status(), 404);
    EXPECT_EQ(e.code(), "not-found");
  }
  EXPECT_TRUE(b.list().empty());

  try {
    a.submit("Executable = ;");
    FAIL();
  } catch (const ApiError& e) {
    EXPECT_EQ(e.status(), 400);
    EXPECT_NE(std::string(e.what()).find("line 1, column 14"), std::string::npos) << e.what();
  }
}

TEST_F(EndToEnd, CancelRunningJob) {
  auto c = as(pki_.alice);
  c.delegate(pki_.alice.cert, pki_.alice.key, 1h);
  auto id = c.submit(R"(Executable = "/bin/true";)").at(0).uuid;
  auto st = c.cancel(id);
  EXPECT_EQ(st.state, "CANCELLED");
  EXPECT_EQ(st.color, "orange");
  EXPECT_THROW(c.cancel(id), ApiError);
}

TEST_F(EndToEnd, WrongServerIsNeverSignedFor) {
  auto c = as(pki_.alice);
  EXPECT_THROW(c.delegate(pki_.alice.cert, pki_.alice.key, 1h, pki::parse_dn("/C=IT/O=Test/CN=elsewhere")),
               delegation::ChannelError);
  EXPECT_TRUE(c.token().empty());
  EXPECT_FALSE(gw->gateway().proxies().get(pki::derive_user_id(pki_.alice.cert.subject())));
}

TEST_F(EndToEnd, RepositoryFlowOverHttps) {
  auto put = net::open_channel("localhost", repo->port(), {pki_.trust, net::TlsIdentity{pki_.bob.cert, pki_.bob.key}},
                               std::string(server::kRepositoryPath));
  delegation::myproxy_put(*put, "bob", "secret", pki_.bob.cert, pki_.bob.key, 24h);

  GatewayClient anon("localhost", gw->port(), {pki_.trust, std::nullopt});
  auto login = anon.delegate_via_repository("bob", "secret", 2h);
  EXPECT_EQ(login.user_dn, pki_.bob.cert.subject().str());
  EXPECT_EQ(login.upstream_connections, 1);
  EXPECT_EQ(login.upstream_round_trips, 2);
  EXPECT_EQ(anon.list().size(), 0u);
  try {
    anon.delegate_via_repository("bob", "wrong");
    FAIL();
  } catch (const ApiError& e) {
    EXPECT_EQ(e.status(), 403);
    EXPECT_EQ(e.code(), "bad-passphrase");
  }
}

TEST_F(EndToEnd, RestartKeepsTokensAndJobs) {
  auto c = as(pki_.alice);
  c.delegate(pki_.alice.cert, pki_.alice.key, 1h);
  auto id = c.submit(R"(Executable = "/bin/echo"; Arguments = "again"; StdOutput = "o";)").at(0).uuid;
  gw->stop();
  TearDown();
  SetUp();
  auto again = as(pki_.alice);
  again.set_token(c.token());
  EXPECT_EQ(again.status(id, 10s).state, "DONE_OK");
}

TEST(BenchTest, CountsConnectionsAndRoundTrips) {
  bench::BenchConfig config;
  config.iterations = 2;
  auto r = bench::run_bench(config);
  ASSERT_EQ(r.samples.size(), 4u);
  for (const auto& s : r.samples) {
    if (s.mode == "embedded") {
      EXPECT_EQ(s.connections, 1);
      EXPECT_EQ(s.round_trips, 5);
    } else {
      EXPECT_EQ(s.connections, 3);
      EXPECT_EQ(s.round_trips, 8);
    }
    EXPECT_GT(s.bytes, 0u);
  }
  auto csv = bench::to_csv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "mode,iter,seconds,connections,round_trips,bytes");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  EXPECT_NE(bench::to_table(r).find("gap"), std::string::npos);
}

TEST(BenchTest, SummaryStatistics) {
  std::vector<bench::BenchSample> s{{"a", 0, 1.0, 1, 2, 10}, {"a", 1, 3.0, 1, 4, 30}, {"b", 0, 9.0, 0, 0, 0}};
  auto m = bench::summarize("a", s);
  EXPECT_DOUBLE_EQ(m.mean_seconds, 2.0);
  EXPECT_DOUBLE_EQ(m.stddev_seconds, std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(m.mean_round_trips, 3.0);
  EXPECT_DOUBLE_EQ(m.mean_bytes, 20.0);
}

}  // namespace
}  // namespace lgrid::client
