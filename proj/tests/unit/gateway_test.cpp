// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#include "lgrid/gateway/gateway.hpp"

#include <sys/stat.h>

#include <random>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "lgrid/delegation/client.hpp"
#include "lgrid/delegation/message.hpp"
#include "lgrid/delegation/myproxy.hpp"
#include "lgrid/gateway/config.hpp"
#include "lgrid/jobs/sandbox.hpp"
#include "lgrid/pki/digest.hpp"
#include "support/fixtures.hpp"

namespace lgrid::gateway {
namespace {

using namespace std::chrono_literals;
using nlohmann::json;
using testing::TempDir;
using testing::TestPki;

// ---------------------------------------------------------------------------
// Policy

VoPolicy sample_policy() {
  VoPolicy p;
  p.add({"test", {"/C=IT/O=Test/*"}, {Operation::kSubmit, Operation::kStatus, Operation::kOutput, Operation::kCancel}});
  p.add({"readers", {"/C=IT/O=Test/CN=Alice"}, {Operation::kStatus}});
  return p;
}

TEST(PolicyTest, MembershipAndOperations) {
  auto p = sample_policy();
  auto alice = pki::parse_dn("/C=IT/O=Test/CN=Alice");
  auto bob = pki::parse_dn("/C=IT/O=Test/CN=Bob");
  auto mallory = pki::parse_dn("/C=XX/O=Evil/CN=Mallory");

  EXPECT_EQ(p.vos_for(alice), (std::vector<std::string>{"test", "readers"}));
  EXPECT_EQ(p.vos_for(bob), (std::vector<std::string>{"test"}));
  EXPECT_TRUE(p.vos_for(mallory).empty());

  EXPECT_EQ(p.check(alice, std::nullopt, Operation::kSubmit), std::nullopt);
  EXPECT_EQ(p.check(alice, "readers", Operation::kStatus), std::nullopt);
  EXPECT_EQ(p.check(alice, "readers", Operation::kSubmit), deny::kNotPermitted);
  EXPECT_EQ(p.check(bob, "readers", Operation::kStatus), deny::kNoVo);
  EXPECT_EQ(p.check(mallory, std::nullopt, Operation::kStatus), deny::kNoVo);
  EXPECT_EQ(p.check(alice, "nonexistent", Operation::kStatus), deny::kNoVo);
}

TEST(PolicyTest, OperationNames) {
  for (auto op : {Operation::kSubmit, Operation::kStatus, Operation::kOutput, Operation::kCancel}) {
    EXPECT_EQ(parse_operation(to_string(op)), op);
  }
  EXPECT_EQ(parse_operation("delete"), std::nullopt);
}

// ---------------------------------------------------------------------------
// Config

TEST(ConfigTest, ParsesAllKeys) {
  auto c = parse_config(R"(
# gateway
listen = "127.0.0.1"
port = 9443
state_root = "state"
host_cert = hostcert.pem
host_key = "/etc/lgrid/hostkey.pem"
trust_anchors = "ca.pem"
executor = "local"
stage_delay_ms = 10
session_deadline_seconds = 30
myproxy = "repo.example.org:7600"
myproxy_rtt_ms = 250
renewal_threshold_minutes = 15

[vo.test]
members = ["/C=IT/O=Test/*", "/C=IT/O=Other/CN=Carol"]   # two patterns
operations = ["submit", "status"]

[vo.admin]
members = "/C=IT/O=Test/CN=Root"
operations = ["cancel"]
)",
                        "/srv/lgrid");
  EXPECT_EQ(c.listen, "127.0.0.1");
  EXPECT_EQ(c.port, 9443);
  EXPECT_EQ(c.state_root, "/srv/lgrid/state");
  EXPECT_EQ(c.host_cert, "/srv/lgrid/hostcert.pem");
  EXPECT_EQ(c.host_key, "/etc/lgrid/hostkey.pem");
  EXPECT_EQ(c.executor, "local");
  EXPECT_EQ(c.stage_delay, 10ms);
  EXPECT_EQ(c.session_deadline, 30s);
  ASSERT_TRUE(c.renewal.external_endpoint);
  EXPECT_EQ(c.renewal.external_endpoint->host, "repo.example.org");
  EXPECT_EQ(c.renewal.external_endpoint->port, 7600);
  EXPECT_EQ(c.myproxy_rtt, 250ms);
  EXPECT_EQ(c.renewal.threshold, 15min);
  ASSERT_EQ(c.policy.rules().size(), 2u);
  EXPECT_EQ(c.policy.rules()[0].name, "test");
  EXPECT_EQ(c.policy.rules()[0].members.size(), 2u);
  EXPECT_EQ(c.policy.rules()[1].members, std::vector<std::string>{"/C=IT/O=Test/CN=Root"});
  EXPECT_EQ(c.policy.rules()[1].operations, std::set<Operation>{Operation::kCancel});
}

TEST(ConfigTest, Defaults) {
  auto c = parse_config("");
  EXPECT_EQ(c.port, kDefaultPort);
  EXPECT_EQ(c.executor, "scripted");
  EXPECT_FALSE(c.state_root.empty());
  EXPECT_FALSE(c.renewal.external_endpoint);
}

TEST(ConfigTest, ErrorsNameTheLine) {
  auto message = [](std::string_view text) {
    try {
      parse_config(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_EQ(message("port = 1\nport = 2\n"), "line 2: duplicate key port");
  EXPECT_EQ(message("\n\ncolour = red\n"), "line 3: unknown key colour");
  EXPECT_EQ(message("port = eighty\n"), "line 1: port must be a non-negative integer");
  EXPECT_EQ(message("executor = grid\n"), "line 1: executor must be scripted or local");
  EXPECT_EQ(message("[vo.a]\noperations = [\"submit\", \"rm\"]\n"), "line 2: unknown operation rm");
  EXPECT_EQ(message("[vo.a]\n[vo.a]\n"), "line 2: duplicate section [vo.a]");
  EXPECT_EQ(message("[server]\n"), "line 1: unknown section [server]");
  EXPECT_EQ(message("myproxy = \"host:99999\"\n"), "line 1: myproxy must be host:port");
  EXPECT_EQ(message("members = [\"a\"\n"), "line 1: unterminated array");
}

// ---------------------------------------------------------------------------
// Token journal

TEST(TokenTableTest, JournalSurvivesRestartAndStoresOnlyDigests) {
  TempDir dir;
  auto journal = dir / "journal.log";
  auto alice = TestPki::get().alice.cert.subject();
  auto bob = TestPki::get().bob.cert.subject();
  std::string ta, tb;
  {
    TokenTable t(journal);
    ta = t.issue(alice, pki::Timestamp(100s));
    tb = t.issue(bob, pki::Timestamp(200s));
    EXPECT_EQ(t.lookup(ta)->dn, alice);
    EXPECT_EQ(t.size(), 2u);
  }
  struct stat st {};
  ASSERT_EQ(::stat(journal.c_str(), &st), 0);
  EXPECT_EQ(st.st_mode & 0777, 0600u);
  auto text = testing::slurp(journal);
  EXPECT_EQ(text.find(ta), std::string::npos);
  EXPECT_NE(text.find(pki::sha256_hex(ta)), std::string::npos);

  // A torn append and garbage must not break the restore.
  testing::spit(journal, text + "garbage line\n" + "300\tissue\tdeadbeef");
  TokenTable restored(journal);
  EXPECT_EQ(restored.load(), 2u);
  auto sa = restored.lookup(ta);
  ASSERT_TRUE(sa);
  EXPECT_EQ(sa->dn, alice);
  EXPECT_EQ(sa->user, pki::derive_user_id(alice));
  EXPECT_EQ(sa->issued_at, pki::Timestamp(100s));
  EXPECT_EQ(restored.lookup(tb)->dn, bob);
  EXPECT_FALSE(restored.lookup("deadbeef"));
  EXPECT_FALSE(restored.lookup(""));
}

// ---------------------------------------------------------------------------
// Gateway

// Carries delegation frames to Gateway::handle as POST /delegate.
class GatewayChannel final : public delegation::Channel {
 public:
  GatewayChannel(Gateway& gw, delegation::PeerIdentity client) : gw_(gw), client_(std::move(client)) {
    server_.dn = pki::parse_dn("/C=IT/O=Test/CN=localhost");
  }

  std::string round_trip(std::string_view frame) override {
    ApiRequest r;
    r.method = "POST";
    r.path = "/delegate";
    r.body = std::string(frame);
    r.peer = client_;
    last = gw_.handle(r);
    return last.body;
  }
  const delegation::PeerIdentity& peer() const override { return server_; }
  int connections_opened() const override { return 1; }

  ApiResponse last;

 private:
  Gateway& gw_;
  delegation::PeerIdentity client_;
  delegation::PeerIdentity server_{pki::parse_dn("/CN=unset"), std::nullopt};
};

delegation::PeerIdentity peer_of(const pki::Identity& id) { return {id.cert.subject(), id.cert}; }

struct GatewayFixture : ::testing::Test {
  void SetUp() override { make_gateway(); }

  void make_gateway(jobs::ScriptedConfig sc = {0ms, {}}) {
    GatewayOptions o;
    o.state_root = root.path();
    o.host_name = "test.host";
    o.trust = TestPki::get().trust;
    o.policy = sample_policy();
    o.executor = std::make_shared<jobs::ScriptedExecutor>(sc);
    o.clock = [this] { return jobs::now_ms() + skew; };
    o.repository = repository;
    gw.reset();
    gw = std::make_unique<Gateway>(std::move(o));
  }

  std::string delegate(const pki::Identity& id, std::chrono::seconds lifetime = 12h) {
    GatewayChannel ch(*gw, peer_of(id));
    auto result = delegation::client_delegate(ch, id.cert, id.key, lifetime);
    EXPECT_EQ(ch.last.status, 200);
    return ch.last.headers.at(std::string(kTokenHeader));
  }

  ApiResponse call(std::string method, std::string path, const std::string& token,
                   std::map<std::string, std::string> query = {}) {
    ApiRequest r;
    r.method = std::move(method);
    r.path = std::move(path);
    r.query = std::move(query);
    if (!token.empty()) r.headers["authorization"] = "Bearer " + token;
    return gw->handle(r);
  }

  ApiResponse submit(const std::string& token, const std::string& jdl, const std::vector<jobs::SandboxEntry>& input = {},
                     std::optional<std::string> vo = std::nullopt) {
    ApiRequest r;
    r.method = "POST";
    r.path = "/jobs";
    r.headers["authorization"] = "Bearer " + token;
    if (vo) r.headers[std::string(kVoHeader)] = *vo;
    r.parts["jdl"] = {jdl, "text/plain", "job.jdl"};
    if (!input.empty()) r.parts["sandbox"] = {jobs::pack(input), "application/gzip", "sandbox.tar.gz"};
    return gw->handle(r);
  }

  std::string submit_one(const std::string& token, const std::string& jdl = R"(Executable = "/bin/echo"; Arguments = "hello"; StdOutput = "out.txt";)") {
    auto resp = submit(token, jdl);
    EXPECT_EQ(resp.status, 201) << resp.body;
    return json::parse(resp.body)["jobs"][0]["uuid"].get<std::string>();
  }

  json state_of(const std::string& token, const std::string& id) {
    auto resp = call("GET", "/jobs/" + id, token);
    EXPECT_EQ(resp.status, 200) << resp.body;
    return json::parse(resp.body);
  }

  TempDir root;
  // The gateway's clock runs with the wall clock, shifted by `skew`.
  std::chrono::milliseconds skew{0};
  delegation::ChannelFactory repository;
  std::unique_ptr<Gateway> gw;
  const TestPki& pki_ = TestPki::get();
};

TEST_F(GatewayFixture, DelegationIssuesWorkingToken) {
  auto token = delegate(pki_.alice);
  EXPECT_EQ(token.size(), 32u);
  auto resp = call("GET", "/jobs", token);
  EXPECT_EQ(resp.status, 200);
  EXPECT_EQ(json::parse(resp.body)["jobs"].size(), 0u);
  EXPECT_TRUE(gw->proxies().valid_at(pki::derive_user_id(pki_.alice.cert.subject()),
                                     pki::now_seconds()));
}

TEST_F(GatewayFixture, DelegationWithoutClientCertificateIs401) {
  ApiRequest r;
  r.method = "POST";
  r.path = "/delegate";
  r.body = delegation::encode(delegation::Init{pki_.alice.cert.subject().str()});
  auto resp = gw->handle(r);
  EXPECT_EQ(resp.status, 401);
  auto m = delegation::decode(resp.body);
  ASSERT_TRUE(std::holds_alternative<delegation::Fault>(m));
  EXPECT_EQ(std::get<delegation::Fault>(m).code, delegation::fault::kUnauthenticated);
}

TEST_F(GatewayFixture, DelegationFaultsMapToStatusCodes) {
  GatewayChannel ch(*gw, peer_of(pki_.alice));
  ch.round_trip(delegation::encode(delegation::Init{pki_.bob.cert.subject().str()}));
  EXPECT_EQ(ch.last.status, 403);
  EXPECT_FALSE(ch.last.headers.count(std::string(kTokenHeader)));

  ch.round_trip("\x00\x00\x00\x03{x}");
  EXPECT_EQ(ch.last.status, 400);

  ch.round_trip(delegation::encode(delegation::SignedProxy{"no-such-session", "pem"}));
  EXPECT_EQ(ch.last.status, 404);

  // Replaying the final message of a finished handshake.
  GatewayChannel ok(*gw, peer_of(pki_.alice));
  auto result = delegation::client_delegate(ok, pki_.alice.cert, pki_.alice.key, 1h);
  std::vector<std::string> sent;
  for (const auto& e : result.transcript.entries()) {
    if (e.direction == delegation::Direction::kSent) sent.push_back(e.payload);
  }
  ASSERT_EQ(sent.size(), 2u);
  ok.round_trip(sent[1]);
  EXPECT_EQ(ok.last.status, 409);
}

TEST_F(GatewayFixture, RequestsWithoutValidTokenAre401) {
  delegate(pki_.alice);
  EXPECT_EQ(call("GET", "/jobs", "").status, 401);
  EXPECT_EQ(call("GET", "/jobs", "0123456789abcdef0123456789abcdef").status, 401);
  auto resp = call("POST", "/jobs", "nope");
  EXPECT_EQ(resp.status, 401);
  EXPECT_EQ(json::parse(resp.body)["error"], "invalid-token");
  ApiRequest r{"GET", "/jobs", {}, {{"authorization", "Basic abc"}}, {}, {}, {}, {}};
  EXPECT_EQ(gw->handle(r).status, 401);
}

TEST_F(GatewayFixture, RoutingErrors) {
  auto token = delegate(pki_.alice);
  EXPECT_EQ(call("GET", "/", token).status, 404);
  EXPECT_EQ(call("GET", "/jobs/x/y", token).status, 404);
  EXPECT_EQ(call("GET", "/delegate", token).status, 405);
  EXPECT_EQ(call("PUT", "/jobs", token).status, 405);
  EXPECT_EQ(call("POST", "/jobs/abc", token).status, 405);
  EXPECT_EQ(call("GET", "/jobs/not-a-job", token).status, 404);
  EXPECT_EQ(call("GET", "/delegate/myproxy", token).status, 405);
}

TEST_F(GatewayFixture, VoPolicyDenialsAre403) {
  auto token = delegate(pki_.alice);
  auto resp = submit(token, R"(Executable = "/bin/true";)", {}, "readers");
  EXPECT_EQ(resp.status, 403);
  EXPECT_EQ(json::parse(resp.body)["error"], "operation-not-permitted");
  resp = submit(token, R"(Executable = "/bin/true";)", {}, "atlas");
  EXPECT_EQ(resp.status, 403);
  EXPECT_EQ(json::parse(resp.body)["error"], "no-vo");

  auto d = gw->authorize(token, "readers", Operation::kStatus);
  EXPECT_TRUE(d.allowed());
  EXPECT_EQ(d.session->dn, pki_.alice.cert.subject());
}

TEST_F(GatewayFixture, UserOutsideEveryVoGetsNothing) {
  auto carol = pki_.ca.issue_user(pki::parse_dn("/C=DE/O=Elsewhere/CN=Carol"));
  auto token = delegate(carol);
  auto resp = call("GET", "/jobs", token);
  EXPECT_EQ(resp.status, 403);
  EXPECT_EQ(json::parse(resp.body)["error"], "no-vo");
}

TEST_F(GatewayFixture, SubmitErrors) {
  auto token = delegate(pki_.alice);
  ApiRequest r{"POST", "/jobs", {}, {{"authorization", "Bearer " + token}}, {}, {}, {}, {}};
  auto resp = gw->handle(r);
  EXPECT_EQ(resp.status, 400);
  EXPECT_EQ(json::parse(resp.body)["error"], "missing-jdl");

  resp = submit(token, "Executable = \"a\";\nArguments = ;\n");
  EXPECT_EQ(resp.status, 400);
  auto body = json::parse(resp.body);
  EXPECT_EQ(body["error"], "invalid-descriptor");
  EXPECT_EQ(body["line"], 2);
  EXPECT_EQ(body["column"], 13);

  resp = submit(token, R"(Executable = "a.sh"; InputSandbox = {"a.sh"};)");
  EXPECT_EQ(resp.status, 400);
  EXPECT_EQ(json::parse(resp.body)["error"], "sandbox-rejected");

  r.parts["jdl"] = {R"(Executable = "/bin/true";)", "text/plain", ""};
  r.parts["sandbox"] = {"not a gzip stream", "application/gzip", ""};
  resp = gw->handle(r);
  EXPECT_EQ(resp.status, 400);
  EXPECT_EQ(json::parse(resp.body)["error"], "sandbox-rejected");
  EXPECT_EQ(json::parse(call("GET", "/jobs", token).body)["jobs"].size(), 0u);
}

TEST_F(GatewayFixture, SubmitStatusOutputRoundTrip) {
  auto token = delegate(pki_.alice);
  auto resp = submit(token, R"(
    Executable = "run.sh";
    StdOutput = "out.txt";
    InputSandbox = {"run.sh", "data/in.txt"};
    OutputSandbox = {"out.txt"};
  )",
                     {{"run.sh", "#!/bin/sh\n"}, {"data/in.txt", "payload"}});
  ASSERT_EQ(resp.status, 201) << resp.body;
  auto id = json::parse(resp.body)["jobs"][0]["uuid"].get<std::string>();

  auto fresh = state_of(token, id);
  EXPECT_EQ(fresh["state"], "SUBMITTED");
  EXPECT_EQ(fresh["color"], "neutral");
  EXPECT_EQ(fresh["history"].size(), 1u);
  EXPECT_EQ(fresh["short_id"], fresh["uuid"].get<std::string>().substr(0, 8));

  auto early = call("GET", "/jobs/" + id + "/output", token);
  EXPECT_EQ(early.status, 409);
  EXPECT_EQ(json::parse(early.body)["error"], "wrong-state");

  auto done = json::parse(call("GET", "/jobs/" + id, token, {{"wait", "5"}}).body);
  EXPECT_EQ(done["state"], "DONE_OK");
  EXPECT_EQ(done["color"], "green");
  std::vector<std::string> states;
  for (const auto& h : done["history"]) states.push_back(h["state"]);
  EXPECT_EQ(states, (std::vector<std::string>{"SUBMITTED", "WAITING", "READY", "SCHEDULED", "RUNNING", "DONE_OK"}));

  auto out = call("GET", "/jobs/" + id + "/output", token);
  ASSERT_EQ(out.status, 200);
  EXPECT_EQ(out.content_type, "application/gzip");
  auto files = jobs::unpack(out.body);
  ASSERT_EQ(files.size(), 1u);
  EXPECT_EQ(files[0].path, "MISSING_OUTPUTS.txt");  // the scripted run.sh produces nothing

  auto cleared = state_of(token, id);
  EXPECT_EQ(cleared["state"], "CLEARED");
  EXPECT_EQ(cleared["color"], "gray");
  EXPECT_EQ(call("GET", "/jobs/" + id + "/output", token).status, 409);
}

TEST_F(GatewayFixture, EchoJobOutputIsFetched) {
  auto token = delegate(pki_.alice);
  auto id = submit_one(token);
  EXPECT_EQ(state_of(token, id)["state"], "SUBMITTED");
  for (int i = 0; i < 10; ++i) gw->maintain();
  EXPECT_EQ(state_of(token, id)["state"], "DONE_OK");
  auto files = jobs::unpack(call("GET", "/jobs/" + id + "/output", token).body);
  ASSERT_EQ(files.size(), 1u);
  EXPECT_EQ(files[0], (jobs::SandboxEntry{"out.txt", "hello\n"}));
}

TEST_F(GatewayFixture, OutputOfRunningJobIs409) {
  make_gateway({1s, {}});
  auto token = delegate(pki_.alice);
  auto id = submit_one(token);
  for (int i = 0; i < 20 && state_of(token, id)["state"] != "RUNNING"; ++i) {
    skew += 1s;
    gw->maintain();
  }
  ASSERT_EQ(state_of(token, id)["state"], "RUNNING");
  EXPECT_EQ(state_of(token, id)["color"], "blue");
  auto resp = call("GET", "/jobs/" + id + "/output", token);
  EXPECT_EQ(resp.status, 409);
}

TEST_F(GatewayFixture, CancelThenCancelAgain) {
  make_gateway({1h, {}});
  auto token = delegate(pki_.alice);
  auto id = submit_one(token);
  auto resp = call("DELETE", "/jobs/" + id, token);
  ASSERT_EQ(resp.status, 200);
  auto body = json::parse(resp.body);
  EXPECT_EQ(body["state"], "CANCELLED");
  EXPECT_EQ(body["color"], "orange");
  resp = call("DELETE", "/jobs/" + id, token);
  EXPECT_EQ(resp.status, 409);
  EXPECT_EQ(json::parse(resp.body)["error"], "already-terminal");
}

TEST_F(GatewayFixture, ParametricSubmitReturnsEveryJob) {
  auto token = delegate(pki_.alice);
  auto resp = submit(token, R"(
    JobType = "Parametric";
    Executable = "/bin/echo";
    Arguments = "_PARAM_";
    StdOutput = "out_PARAM_.txt";
    Parameters = 3; ParameterStart = 0; ParameterStep = 1;
  )");
  ASSERT_EQ(resp.status, 201) << resp.body;
  EXPECT_EQ(json::parse(resp.body)["jobs"].size(), 3u);
  EXPECT_EQ(json::parse(call("GET", "/jobs", token).body)["jobs"].size(), 3u);
}

TEST_F(GatewayFixture, OtherUsersJobsLookAbsent) {
  auto ta = delegate(pki_.alice);
  auto tb = delegate(pki_.bob);
  auto id = submit_one(ta);
  const std::string absent = "00000000-0000-4000-8000-000000000000";

  for (auto [method, suffix] : std::vector<std::pair<std::string, std::string>>{
           {"GET", ""}, {"GET", "/output"}, {"DELETE", ""}}) {
    auto resp = call(method, "/jobs/" + id + suffix, tb);
    EXPECT_EQ(resp.status, 404) << method << " " << suffix;
    EXPECT_EQ(resp.body, call(method, "/jobs/" + absent + suffix, tb).body);
    EXPECT_EQ(resp.body.find("Alice"), std::string::npos);
  }
  EXPECT_EQ(json::parse(call("GET", "/jobs", tb).body)["jobs"].size(), 0u);
  EXPECT_EQ(state_of(ta, id)["state"], "SUBMITTED");
}

// Two users, interleaved, with a share of forged tokens.
TEST_F(GatewayFixture, InterleavedUsersStayIsolated) {
  const std::map<std::string, std::string> tokens{{"alice", delegate(pki_.alice)}, {"bob", delegate(pki_.bob)}};
  std::map<std::string, std::vector<std::string>> owned;
  std::mt19937_64 rng(7);
  auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };

  int requests = 0, forged = 0, cross = 0;
  for (; requests < 1500; ++requests) {
    std::string user = pick(2) ? "alice" : "bob";
    std::string other = user == "alice" ? "bob" : "alice";
    bool forge = pick(5) == 0;
    std::string token = forge ? pki::random_token(16) : tokens.at(user);
    if (forge && pick(2)) token = tokens.at(user).substr(0, 31) + "x";

    int action = static_cast<int>(pick(5));
    ApiResponse resp;
    std::string target;
    bool foreign = false;
    if (action == 0 || (owned[user].empty() && owned[other].empty())) {
      resp = submit(token, R"(Executable = "/bin/echo"; Arguments = "x"; StdOutput = "o";)");
      if (resp.status == 201) owned[user].push_back(json::parse(resp.body)["jobs"][0]["uuid"]);
    } else if (action == 1) {
      resp = call("GET", "/jobs", token);
      if (resp.status == 200) {
        auto jobs = json::parse(resp.body)["jobs"];
        EXPECT_EQ(jobs.size(), owned[user].size());
        for (const auto& j : jobs) {
          EXPECT_NE(std::find(owned[user].begin(), owned[user].end(), j["uuid"]), owned[user].end());
        }
      }
    } else {
      foreign = owned[user].empty() || (!owned[other].empty() && pick(2));
      const auto& pool = foreign ? owned[other] : owned[user];
      target = pool[pick(pool.size())];
      if (action == 2) resp = call("GET", "/jobs/" + target, token);
      if (action == 3) resp = call("GET", "/jobs/" + target + "/output", token);
      if (action == 4) resp = call("DELETE", "/jobs/" + target, token);
    }

    if (forge) {
      ++forged;
      ASSERT_EQ(resp.status, 401) << "request " << requests;
      continue;
    }
    ASSERT_NE(resp.status, 401) << "request " << requests;
    if (foreign) {
      ++cross;
      ASSERT_EQ(resp.status, 404) << "request " << requests;
      ASSERT_EQ(resp.body.find(target), std::string::npos);
    } else if (!target.empty()) {
      ASSERT_TRUE(resp.status == 200 || resp.status == 409) << resp.status << " " << resp.body;
    }
    if (pick(4) == 0) gw->maintain();
  }
  EXPECT_GT(forged, 200);
  EXPECT_GT(cross, 200);
  // Every job still belongs to its submitter, and its history replays cleanly.
  for (const auto& [user, ids] : owned) {
    for (const auto& id : ids) {
      auto r = gw->jobs().status(*gw->jobs().resolve(id), user == "alice" ? pki_.alice.cert.subject() : pki_.bob.cert.subject());
      EXPECT_TRUE(jobs::history_is_legal(r.history));
    }
  }
}

TEST_F(GatewayFixture, ExpiredProxyBlocksRequestsAndAbortsJobs) {
  make_gateway({24h, {}});
  auto token = delegate(pki_.alice, 1h);
  auto id = submit_one(token);
  EXPECT_TRUE(gw->maintain().expired_jobs.empty());

  skew += 2h;
  auto resp = call("GET", "/jobs/" + id, token);
  EXPECT_EQ(resp.status, 403);
  EXPECT_EQ(json::parse(resp.body)["error"], "proxy-expired");
  EXPECT_EQ(submit(token, R"(Executable = "/bin/true";)").status, 403);

  auto report = gw->maintain();
  auto r = gw->jobs().status(*gw->jobs().resolve(id), pki_.alice.cert.subject());
  ASSERT_EQ(report.expired_jobs, std::vector<std::string>{r.id.str()});
  EXPECT_EQ(r.state, jobs::JobState::kAborted);
  EXPECT_EQ(r.history.back().reason, "proxy-expired");
  EXPECT_TRUE(gw->maintain().expired_jobs.empty());

  // A fresh delegation revives the session.
  skew = 0ms;
  auto token2 = delegate(pki_.alice, 1h);
  EXPECT_EQ(state_of(token2, id)["state"], "ABORTED");
  EXPECT_EQ(state_of(token2, id)["color"], "red");
}

TEST_F(GatewayFixture, RestartRestoresTokensProxiesAndJobs) {
  make_gateway({1h, {}});
  auto token = delegate(pki_.alice);
  auto a = submit_one(token);
  auto b = submit_one(token);
  ASSERT_EQ(call("DELETE", "/jobs/" + b, token).status, 200);

  make_gateway({0ms, {}});
  EXPECT_EQ(call("GET", "/jobs", token).status, 401);
  gw->restore();
  auto list = json::parse(call("GET", "/jobs", token).body)["jobs"];
  ASSERT_EQ(list.size(), 2u);
  EXPECT_EQ(list[0]["uuid"], a);
  EXPECT_EQ(list[0]["state"], "SUBMITTED");
  EXPECT_EQ(list[1]["state"], "CANCELLED");
  EXPECT_EQ(json::parse(call("GET", "/jobs/" + a, token, {{"wait", "5"}}).body)["state"], "DONE_OK");
  EXPECT_EQ(json::parse(submit(token, R"(Executable = "/bin/true";)").body)["jobs"].size(), 1u);
}

TEST_F(GatewayFixture, RetrievalFromRepository) {
  EXPECT_EQ(gw->handle({"POST", "/delegate/myproxy", {}, {}, "{}", {}, {}, {}}).status, 503);

  delegation::MyProxySimulator sim(pki_.trust);
  auto server = delegation::PeerIdentity{pki::parse_dn("/C=IT/O=Test/CN=myproxy"), std::nullopt};
  auto connect = [&sim, server](delegation::PeerIdentity client) {
    return std::make_unique<delegation::LoopbackChannel>(
        [&sim](const delegation::PeerIdentity& p, std::string_view f) { return sim.handle_frame(p, f); },
        std::move(client), server);
  };
  repository = [&] { return connect({pki::parse_dn("/C=IT/O=Test/CN=localhost"), pki_.host.cert}); };
  make_gateway();

  auto put = connect(peer_of(pki_.alice));
  delegation::myproxy_put(*put, "alice", "correct horse", pki_.alice.cert, pki_.alice.key, 24h);

  ApiRequest r{"POST", "/delegate/myproxy", {}, {}, R"({"username":"alice","passphrase":"wrong"})", {}, {}, {}};
  auto resp = gw->handle(r);
  EXPECT_EQ(resp.status, 403);
  EXPECT_EQ(json::parse(resp.body)["error"], "bad-passphrase");

  r.body = R"({"username":"alice","passphrase":"correct horse","lifetime_seconds":3600})";
  r.peer = peer_of(pki_.bob);
  resp = gw->handle(r);
  EXPECT_EQ(resp.status, 403);
  EXPECT_EQ(json::parse(resp.body)["error"], "dn-mismatch");

  r.peer.reset();
  resp = gw->handle(r);
  ASSERT_EQ(resp.status, 200) << resp.body;
  auto body = json::parse(resp.body);
  EXPECT_EQ(body["user_dn"], pki_.alice.cert.subject().str());
  EXPECT_EQ(body["upstream"]["connections"], 1);
  EXPECT_EQ(body["upstream"]["round_trips"], 2);
  auto token = body["token"].get<std::string>();
  EXPECT_EQ(call("GET", "/jobs", token).status, 200);

  r.body = "not json";
  EXPECT_EQ(gw->handle(r).status, 400);
}

}  // namespace
}  // namespace lgrid::gateway
