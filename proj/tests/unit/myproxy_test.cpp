// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "lgrid/delegation/client.hpp"
#include "lgrid/delegation/renewal.hpp"
#include "lgrid/delegation/server.hpp"
#include "support/fixtures.hpp"

namespace lgrid::delegation {
namespace {

using lgrid::testing::TestPki;
using namespace std::chrono_literals;

PeerIdentity identity_of(const pki::Identity& id) { return {id.cert.subject(), id.cert}; }

/// Simulator plus a controllable clock, reached over loopback channels.
struct Repository {
  Repository() : sim(TestPki::get().trust, config()) {}

  SimulatorConfig config() {
    SimulatorConfig c;
    c.clock = [this] { return now; };
    return c;
  }

  std::unique_ptr<Channel> connect(const pki::Identity& as) {
    return std::make_unique<LoopbackChannel>(
        [this](const PeerIdentity& p, std::string_view f) { return sim.handle_frame(p, f); },
        identity_of(as), identity_of(TestPki::get().host));
  }

  pki::Timestamp now = pki::now_seconds();
  MyProxySimulator sim;
};

TEST(MyProxyWireTest, RoundTripsRepositoryMessages) {
  std::vector<RepositoryMessage> all = {PutRequest{"u", "p", 10}, GetRequest{"u", "p", 20},
                                        GetGranted{"s", "/CN=a"},   CsrSubmit{"s", "c"},
                                        ChainReply{"s", "pem"},     CsrReply{"s", "c"},
                                        SignedProxy{"s", "c"},      Ack{"s", "f", 3},
                                        Fault{"x", "y"}};
  for (const auto& m : all) {
    auto back = decode_repository(encode_repository(m));
    EXPECT_EQ(back.index(), m.index());
    EXPECT_EQ(encode_repository(back), encode_repository(m));
  }
  EXPECT_THROW(decode_repository(encode(Init{"/CN=a"})), WireError);
}

TEST(MyProxyTest, PutThenGetYieldsChainRootedInStoredCredential) {
  const auto& pki = TestPki::get();
  Repository repo;
  auto ch = repo.connect(pki.alice);
  Transcript put_log;
  auto receipt = myproxy_put(*ch, "alice", "correct horse", pki.alice.cert, pki.alice.key,
                             std::chrono::hours(24 * 7), &put_log);
  EXPECT_EQ(repo.sim.credential_count(), 1u);

  auto ch2 = repo.connect(pki.host);
  Transcript get_log;
  auto bundle_pem = myproxy_get(*ch2, "alice", "correct horse", 12h, &get_log);
  auto bundle = pki::parse_proxy_bundle(bundle_pem);
  auto report = pki::validate_proxy_chain(bundle, pki.trust, pki::now_seconds());
  EXPECT_TRUE(report.ok()) << report.summary();

  // proxy -> stored credential -> user certificate
  ASSERT_EQ(bundle.chain.size(), 2u);
  EXPECT_EQ(bundle.chain[0].fingerprint(), receipt.fingerprint);
  EXPECT_EQ(bundle.user_dn(), pki.alice.cert.subject());
  EXPECT_TRUE(bundle.proxy_cert.subject().extends_by_one_cn(bundle.chain[0].subject()));
  EXPECT_NEAR(static_cast<double>((bundle.proxy_cert.not_after() - pki::now_seconds()).count()),
              12 * 3600.0, 5.0);

  EXPECT_EQ(put_log.connection_count(), 1);
  EXPECT_EQ(put_log.round_trip_count(), 2);
  EXPECT_EQ(get_log.connection_count(), 1);
  EXPECT_EQ(get_log.round_trip_count(), 2);
}

TEST(MyProxyTest, ExternalFlowCostsMoreThanEmbedded) {
  const auto& pki = TestPki::get();
  Repository repo;
  Transcript external;
  auto put_ch = repo.connect(pki.alice);
  myproxy_put(*put_ch, "alice", "pw123456", pki.alice.cert, pki.alice.key, 24h, &external);
  auto get_ch = repo.connect(pki.host);
  myproxy_get(*get_ch, "alice", "pw123456", 12h, &external);

  ProxyStore store(pki.trust);
  DelegationService service(store);
  LoopbackChannel direct(
      [&](const PeerIdentity& p, std::string_view f) { return service.handle_frame(p, f); },
      identity_of(pki.alice), identity_of(pki.host));
  auto embedded = client_delegate(direct, pki.alice.cert, pki.alice.key, 12h).transcript;

  EXPECT_EQ(external.connection_count(), 2);
  EXPECT_EQ(external.round_trip_count(), 4);
  EXPECT_EQ(embedded.connection_count(), 1);
  EXPECT_EQ(embedded.round_trip_count(), 2);
  EXPECT_LT(embedded.connection_count(), external.connection_count());
  EXPECT_LT(embedded.round_trip_count(), external.round_trip_count());
  // The legacy flow puts a reusable secret on the wire; the embedded one has none.
  EXPECT_GT(external.count_occurrences("pw123456"), 0u);
}

TEST(MyProxyTest, AuthenticationErrors) {
  const auto& pki = TestPki::get();
  Repository repo;
  auto ch = repo.connect(pki.alice);
  myproxy_put(*ch, "alice", "secret-one", pki.alice.cert, pki.alice.key, 2h);

  auto expect_code = [&](const std::string& user, const std::string& pass, std::string_view code) {
    auto c = repo.connect(pki.host);
    try {
      myproxy_get(*c, user, pass, 1h);
      ADD_FAILURE() << "expected " << code;
    } catch (const MyProxyError& e) {
      EXPECT_EQ(e.code(), code);
    }
  };
  expect_code("alice", "secret-two", fault::kBadPassphrase);
  expect_code("mallory", "secret-one", fault::kUnknownUser);
  repo.now += 3h;
  expect_code("alice", "secret-one", fault::kCredentialExpired);
}

TEST(MyProxyTest, PutRequiresAuthenticatedPeer) {
  Repository repo;
  PeerIdentity anon{pki::parse_dn("/CN=anon"), std::nullopt};
  auto reply = repo.sim.handle(anon, PutRequest{"u", "p", 60});
  ASSERT_TRUE(std::holds_alternative<Fault>(reply));
  EXPECT_EQ(std::get<Fault>(reply).code, fault::kUnauthenticated);
}

TEST(MyProxyTest, RepositoriesKeepIndependentCredentials) {
  const auto& pki = TestPki::get();
  Repository a, b;
  auto c1 = a.connect(pki.alice);
  auto c2 = b.connect(pki.alice);
  myproxy_put(*c1, "alice", "same", pki.alice.cert, pki.alice.key, 1h);
  myproxy_put(*c2, "alice", "same", pki.alice.cert, pki.alice.key, 1h);
  // Each repository salts independently; both must still accept the secret.
  auto g1 = a.connect(pki.host);
  auto g2 = b.connect(pki.host);
  EXPECT_NO_THROW(myproxy_get(*g1, "alice", "same", 1h));
  EXPECT_NO_THROW(myproxy_get(*g2, "alice", "same", 1h));
}

// ---- renewal ----

std::string short_proxy(const pki::Identity& user, std::chrono::seconds lifetime,
                        pki::Timestamp now) {
  auto fresh = pki::generate_keypair();
  auto csr = pki::create_proxy_csr(user.cert.subject(), fresh);
  auto cert = pki::sign_proxy_csr(user.cert, user.key, csr, lifetime, now);
  return pki::assemble_proxy_bundle(cert, fresh.private_key(), user.cert);
}

class FailingSource : public RenewalSource {
 public:
  std::string fetch(const pki::UserId&, std::chrono::seconds) override {
    throw ChannelError("connection refused");
  }
};

struct RenewalFixture : ::testing::Test {
  RenewalFixture()
      : store(TestPki::get().trust),
        alice(pki::derive_user_id(TestPki::get().alice.cert.subject())) {
    auto ch = repo.connect(TestPki::get().alice);
    myproxy_put(*ch, "alice", "renew-me", TestPki::get().alice.cert, TestPki::get().alice.key,
                std::chrono::hours(24 * 3));
    policy.external_endpoint = Endpoint{};
  }

  RepositoryRenewalSource source() {
    return RepositoryRenewalSource(
        [this] { return repo.connect(TestPki::get().host); },
        [this](const pki::UserId& u) -> std::optional<RepositoryLogin> {
          if (u == alice) return RepositoryLogin{"alice", "renew-me"};
          return std::nullopt;
        });
  }

  Repository repo;
  ProxyStore store;
  pki::UserId alice;
  RenewalPolicy policy;
};

TEST_F(RenewalFixture, RenewsWithinThreshold) {
  auto now = pki::now_seconds();
  auto old = store.put(short_proxy(TestPki::get().alice, 20min, now), now);
  auto src = source();
  auto actions = renew_if_needed(store, {{"job-1", alice}, {"job-2", alice}}, policy, now, &src);
  ASSERT_EQ(actions.size(), 1u);
  EXPECT_EQ(actions[0].outcome, RenewalOutcome::kRenewed);
  EXPECT_EQ(actions[0].job_ids, (std::vector<std::string>{"job-1", "job-2"}));
  ASSERT_TRUE(actions[0].new_not_after);
  EXPECT_GT(*actions[0].new_not_after, old.not_after);
  EXPECT_EQ(store.get(alice)->not_after, *actions[0].new_not_after);
  EXPECT_TRUE(store.valid_at(alice, now + 5h));
}

TEST_F(RenewalFixture, NothingToDoOutsideThreshold) {
  auto now = pki::now_seconds();
  store.put(short_proxy(TestPki::get().alice, 2h, now), now);
  auto src = source();
  EXPECT_TRUE(renew_if_needed(store, {{"job-1", alice}}, policy, now, &src).empty());
}

TEST_F(RenewalFixture, UnreachableRepositoryKeepsOldBundle) {
  auto now = pki::now_seconds();
  auto old = store.put(short_proxy(TestPki::get().alice, 20min, now), now);
  FailingSource down;
  auto actions = renew_if_needed(store, {{"job-1", alice}}, policy, now, &down);
  ASSERT_EQ(actions.size(), 1u);
  EXPECT_EQ(actions[0].outcome, RenewalOutcome::kRenewalFailed);
  EXPECT_NE(actions[0].detail.find("refused"), std::string::npos);
  EXPECT_EQ(store.get(alice)->fingerprint, old.fingerprint);
}

TEST_F(RenewalFixture, NoEndpointMeansUnrenewable) {
  auto now = pki::now_seconds();
  store.put(short_proxy(TestPki::get().alice, 20min, now), now);
  policy.external_endpoint.reset();
  auto src = source();
  auto actions = renew_if_needed(store, {{"job-1", alice}}, policy, now, &src);
  ASSERT_EQ(actions.size(), 1u);
  EXPECT_EQ(actions[0].outcome, RenewalOutcome::kExpiringUnrenewable);
}

TEST_F(RenewalFixture, UserWithoutLoginFails) {
  auto now = pki::now_seconds();
  auto bob = pki::derive_user_id(TestPki::get().bob.cert.subject());
  store.put(short_proxy(TestPki::get().bob, 10min, now), now);
  auto src = source();
  auto actions = renew_if_needed(store, {{"job-b", bob}}, policy, now, &src);
  ASSERT_EQ(actions.size(), 1u);
  EXPECT_EQ(actions[0].outcome, RenewalOutcome::kRenewalFailed);
}

}  // namespace
}  // namespace lgrid::delegation
