// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>
#include <sys/stat.h>

#include "lgrid/delegation/client.hpp"
#include "lgrid/delegation/server.hpp"
#include "lgrid/pki/digest.hpp"
#include "support/fixtures.hpp"

namespace lgrid::delegation {
namespace {

using lgrid::testing::TempDir;
using lgrid::testing::TestPki;
using namespace std::chrono_literals;

PeerIdentity identity_of(const pki::Identity& id) { return {id.cert.subject(), id.cert}; }

struct Harness {
  explicit Harness(std::optional<std::filesystem::path> dir = std::nullopt)
      : store(TestPki::get().trust, {}, std::move(dir)), service(store, ServiceConfig{}) {}

  LoopbackChannel channel_for(const pki::Identity& client) {
    return LoopbackChannel(
        [this](const PeerIdentity& peer, std::string_view f) { return service.handle_frame(peer, f); },
        identity_of(client), identity_of(TestPki::get().host));
  }

  ProxyStore store;
  DelegationService service;
};

TEST(WireTest, RoundTripsEveryVariant) {
  std::vector<Message> all = {Init{"/C=IT/O=Test/CN=Alice"}, CsrReply{"s1", "csr"},
                              SignedProxy{"s1", "cert"}, Ack{"s1", "ab", 1700000000},
                              Fault{"bad-state", "x"}};
  for (const auto& m : all) {
    auto bytes = encode(m);
    EXPECT_EQ(bytes.size(), 4 + to_json(m).size());
    auto back = decode(bytes);
    EXPECT_EQ(back.index(), m.index());
    EXPECT_EQ(to_json(back), to_json(m));
  }
}

TEST(WireTest, LengthPrefixIsBigEndian) {
  auto f = frame(std::string(258, 'x'));
  EXPECT_EQ(static_cast<unsigned char>(f[0]), 0);
  EXPECT_EQ(static_cast<unsigned char>(f[2]), 1);
  EXPECT_EQ(static_cast<unsigned char>(f[3]), 2);
}

TEST(WireTest, RejectsMalformedInput) {
  EXPECT_THROW(decode("ab"), WireError);
  EXPECT_THROW(decode(frame("{}")), WireError);
  EXPECT_THROW(decode(frame("[1]")), WireError);
  EXPECT_THROW(decode(frame(R"({"type":"Nope"})")), WireError);
  EXPECT_THROW(decode(frame(R"({"type":"Ack","session_id":"a","proxy_fingerprint":"b"})")),
               WireError);
  auto good = encode(Init{"/CN=x"});
  EXPECT_THROW(decode(good + "z"), WireError);
}

TEST(DelegationTest, HappyPathStoresValidatingBundle) {
  const auto& pki = TestPki::get();
  Harness h;
  auto channel = h.channel_for(pki.alice);
  auto before = pki::now_seconds();
  auto result = client_delegate(channel, pki.alice.cert, pki.alice.key, kDefaultProxyLifetime);

  auto stored = h.store.get(pki::derive_user_id(pki.alice.cert.subject()));
  ASSERT_TRUE(stored);
  EXPECT_EQ(stored->fingerprint, result.ack.proxy_fingerprint);
  EXPECT_EQ(stored->not_after.time_since_epoch().count(), result.ack.not_after);
  EXPECT_NEAR(static_cast<double>((stored->not_after - before).count()), 12 * 3600.0, 5.0);
  EXPECT_TRUE(pki::validate_proxy_chain(stored->bundle, pki.trust, pki::now_seconds()).ok());

  auto bundle = pki::parse_proxy_bundle(stored->bundle);
  EXPECT_TRUE(bundle.proxy_cert.subject().extends_by_one_cn(pki.alice.cert.subject()));
  EXPECT_EQ(bundle.user_certificate(), pki.alice.cert);

  EXPECT_EQ(result.transcript.connection_count(), 1);
  EXPECT_EQ(result.transcript.round_trip_count(), 2);
  EXPECT_EQ(result.transcript.entries().size(), 4u);
  std::size_t sum = 0;
  for (const auto& e : result.transcript.entries()) {
    EXPECT_EQ(e.byte_length, e.payload.size());
    sum += e.byte_length;
  }
  EXPECT_EQ(sum, result.transcript.total_bytes());
}

TEST(DelegationTest, CsrSubjectCarriesOneExtraCn) {
  const auto& pki = TestPki::get();
  DelegationSession s("sid", identity_of(pki.alice), pki::now_seconds() + 60s);
  auto reply = s.on_init(Init{pki.alice.cert.subject().str()}, pki::now_seconds());
  auto* csr = std::get_if<CsrReply>(&reply);
  ASSERT_TRUE(csr);
  auto subject = pki::CertificateSigningRequest::from_pem(csr->csr_pem).subject();
  EXPECT_TRUE(subject.extends_by_one_cn(pki.alice.cert.subject()));
  EXPECT_EQ(s.state(), SessionState::kAwaitSigned);
}

// A server that asks the client to sign a proxy for somebody else.
TEST(DelegationTest, ClientRejectsSubstitutedSubject) {
  const auto& pki = TestPki::get();
  for (std::string victim : {"/C=IT/O=Test/CN=Mallory/CN=1", "/C=IT/O=Test/CN=Alice",
                             "/C=IT/O=Test/CN=Alice/CN=1/CN=2"}) {
    int calls = 0;
    auto mallory = pki::generate_keypair();
    LoopbackChannel channel(
        [&](const PeerIdentity&, std::string_view) {
          ++calls;
          auto csr = pki::make_csr(pki::parse_dn(victim), mallory);
          return encode(CsrReply{"sid", csr.to_pem()});
        },
        identity_of(pki.alice), identity_of(pki.host));
    try {
      client_delegate(channel, pki.alice.cert, pki.alice.key, 1h);
      ADD_FAILURE() << "accepted " << victim;
    } catch (const DelegationError& e) {
      EXPECT_EQ(e.kind(), DelegationError::Kind::kSubstitution) << victim;
    }
    EXPECT_EQ(calls, 1) << "client must not send anything after a substituted CSR";
  }
}

TEST(DelegationTest, ClientChecksServerIdentity) {
  const auto& pki = TestPki::get();
  Harness h;
  auto channel = h.channel_for(pki.alice);
  ClientOptions opts;
  opts.expected_server = pki::parse_dn("/C=IT/O=Test/CN=elsewhere");
  try {
    client_delegate(channel, pki.alice.cert, pki.alice.key, 1h, opts);
    FAIL();
  } catch (const DelegationError& e) {
    EXPECT_EQ(e.kind(), DelegationError::Kind::kChannelIdentity);
  }
  opts.expected_server = pki.host.cert.subject();
  EXPECT_NO_THROW(client_delegate(channel, pki.alice.cert, pki.alice.key, 1h, opts));
}

TEST(DelegationTest, InitClaimingAnotherDnIsRejected) {
  const auto& pki = TestPki::get();
  Harness h;
  auto reply = h.service.handle(identity_of(pki.alice), Init{pki.bob.cert.subject().str()});
  auto* f = std::get_if<Fault>(&reply);
  ASSERT_TRUE(f);
  EXPECT_EQ(f->code, fault::kDnMismatch);
}

TEST(DelegationTest, SecondInitOnSessionIsBadState) {
  const auto& pki = TestPki::get();
  DelegationSession s("sid", identity_of(pki.alice), pki::now_seconds() + 60s);
  Init init{pki.alice.cert.subject().str()};
  ASSERT_TRUE(std::holds_alternative<CsrReply>(s.on_init(init, pki::now_seconds())));
  auto again = s.on_init(init, pki::now_seconds());
  ASSERT_TRUE(std::holds_alternative<Fault>(again));
  EXPECT_EQ(std::get<Fault>(again).code, fault::kBadState);
  EXPECT_EQ(s.state(), SessionState::kFailed);
}

TEST(DelegationTest, SignedProxyFromAnotherPeerIsRejected) {
  const auto& pki = TestPki::get();
  Harness h;
  auto reply = h.service.handle(identity_of(pki.alice), Init{pki.alice.cert.subject().str()});
  auto sid = std::get<CsrReply>(reply).session_id;
  auto out = h.service.handle(identity_of(pki.bob), SignedProxy{sid, "whatever"});
  ASSERT_TRUE(std::holds_alternative<Fault>(out));
  EXPECT_EQ(std::get<Fault>(out).code, fault::kDnMismatch);
}

TEST(DelegationTest, CertOverDifferentKeyIsKeyMismatch) {
  const auto& pki = TestPki::get();
  Harness h;
  auto alice = identity_of(pki.alice);
  auto reply = std::get<CsrReply>(h.service.handle(alice, Init{pki.alice.cert.subject().str()}));

  // Sign a second CSR made over a key the server never generated.
  auto other = pki::generate_keypair();
  auto rogue_csr = pki::create_proxy_csr(pki.alice.cert.subject(), other);
  auto rogue = pki::sign_proxy_csr(pki.alice.cert, pki.alice.key, rogue_csr, 1h, pki::now_seconds());

  auto out = h.service.handle(alice, SignedProxy{reply.session_id, rogue.to_pem()});
  ASSERT_TRUE(std::holds_alternative<Fault>(out));
  EXPECT_EQ(std::get<Fault>(out).code, fault::kKeyMismatch);
  EXPECT_FALSE(h.store.get(pki::derive_user_id(pki.alice.cert.subject())));
}

TEST(DelegationTest, ReplayAfterDoneIsBadState) {
  const auto& pki = TestPki::get();
  Harness h;
  auto alice = identity_of(pki.alice);
  auto reply = std::get<CsrReply>(h.service.handle(alice, Init{pki.alice.cert.subject().str()}));
  auto csr = pki::CertificateSigningRequest::from_pem(reply.csr_pem);
  auto cert = pki::sign_proxy_csr(pki.alice.cert, pki.alice.key, csr, 1h, pki::now_seconds());
  SignedProxy sp{reply.session_id, cert.to_pem()};

  ASSERT_TRUE(std::holds_alternative<Ack>(h.service.handle(alice, sp)));
  auto first = h.store.get(pki::derive_user_id(alice.dn))->fingerprint;
  auto replay = h.service.handle(alice, sp);
  ASSERT_TRUE(std::holds_alternative<Fault>(replay));
  EXPECT_EQ(std::get<Fault>(replay).code, fault::kBadState);
  EXPECT_EQ(h.store.get(pki::derive_user_id(alice.dn))->fingerprint, first);
}

TEST(DelegationTest, UnknownSessionAndUnauthenticatedPeer) {
  const auto& pki = TestPki::get();
  Harness h;
  auto out = h.service.handle(identity_of(pki.alice), SignedProxy{"nope", "x"});
  EXPECT_EQ(std::get<Fault>(out).code, fault::kUnknownSession);
  PeerIdentity anonymous{pki::parse_dn("/CN=anonymous"), std::nullopt};
  out = h.service.handle(anonymous, Init{"/CN=anonymous"});
  EXPECT_EQ(std::get<Fault>(out).code, fault::kUnauthenticated);
}

TEST(DelegationTest, ExpiredSessionIsRejected) {
  const auto& pki = TestPki::get();
  ProxyStore store(pki.trust);
  auto t = pki::now_seconds();
  ServiceConfig cfg;
  cfg.clock = [&] { return t; };
  DelegationService service(store, cfg);
  auto alice = identity_of(pki.alice);
  auto reply = std::get<CsrReply>(service.handle(alice, Init{alice.dn.str()}));
  auto csr = pki::CertificateSigningRequest::from_pem(reply.csr_pem);
  auto cert = pki::sign_proxy_csr(pki.alice.cert, pki.alice.key, csr, 1h, t);

  t += 61s;
  auto out = service.handle(alice, SignedProxy{reply.session_id, cert.to_pem()});
  ASSERT_TRUE(std::holds_alternative<Fault>(out));
  EXPECT_EQ(std::get<Fault>(out).code, fault::kSessionExpired);
  EXPECT_EQ(service.reap(t), 1u);
  EXPECT_EQ(service.session_count(), 0u);
}

TEST(DelegationTest, ClientMapsExpiryToTimeout) {
  const auto& pki = TestPki::get();
  ProxyStore store(pki.trust);
  auto t = pki::now_seconds();
  ServiceConfig cfg;
  cfg.clock = [&] { return t; };
  DelegationService service(store, cfg);
  int n = 0;
  LoopbackChannel channel(
      [&](const PeerIdentity& p, std::string_view f) {
        if (n++ == 1) t += 120s;  // the client dawdled before SignedProxy
        return service.handle_frame(p, f);
      },
      identity_of(pki.alice), identity_of(pki.host));
  try {
    client_delegate(channel, pki.alice.cert, pki.alice.key, 1h);
    FAIL();
  } catch (const DelegationError& e) {
    EXPECT_EQ(e.kind(), DelegationError::Kind::kTimeout);
  }
}

// Exhaustive enumeration of client-visible inputs to one session. Every
// observed state change must be a declared edge, the fresh key pair may only
// exist from AWAIT_SIGNED on, and DONE needs a correctly signed proxy.
TEST(SessionSafetyTest, AllSequencesUpToLengthFour) {
  const auto& pki = TestPki::get();
  enum Input { kInitOwn, kInitOther, kSignedGood, kSignedWrongKey, kSignedGarbage, kAck, kCsrReply,
               kLate, kInputCount };

  auto stray_key = pki::generate_keypair();
  auto stray_cert = pki::sign_proxy_csr(pki.alice.cert, pki.alice.key,
                                        pki::create_proxy_csr(pki.alice.cert.subject(), stray_key),
                                        1h, pki::now_seconds());

  std::size_t sequences = 0, done_count = 0;
  std::vector<int> seq;
  std::function<void(int)> run = [&](int depth) {
    if (depth == 0) return;
    for (int in = 0; in < kInputCount; ++in) {
      seq.push_back(in);
      ++sequences;

      auto t0 = pki::now_seconds();
      DelegationSession s("sid", identity_of(pki.alice), t0 + 60s);
      bool saw_good_signed = false;
      for (int step : seq) {
        auto before = s.state();
        auto now = t0;
        switch (step) {
          case kInitOwn:
            s.on_init(Init{pki.alice.cert.subject().str()}, now);
            break;
          case kInitOther:
            s.on_init(Init{pki.bob.cert.subject().str()}, now);
            break;
          case kSignedGood: {
            std::string pem = stray_cert.to_pem();
            if (s.csr()) {
              pem = pki::sign_proxy_csr(pki.alice.cert, pki.alice.key, *s.csr(), 1h, now).to_pem();
            }
            auto r = s.on_signed_proxy(SignedProxy{"sid", pem}, pki.trust, {}, now);
            if (std::holds_alternative<DelegationSession::Completed>(r)) saw_good_signed = true;
            break;
          }
          case kSignedWrongKey:
            s.on_signed_proxy(SignedProxy{"sid", stray_cert.to_pem()}, pki.trust, {}, now);
            break;
          case kSignedGarbage:
            s.on_signed_proxy(SignedProxy{"sid", "-----BEGIN nonsense"}, pki.trust, {}, now);
            break;
          case kAck:
            s.on_unexpected(Ack{"sid", "x", 0});
            break;
          case kCsrReply:
            s.on_unexpected(CsrReply{"sid", "x"});
            break;
          case kLate:
            s.on_init(Init{pki.alice.cert.subject().str()}, t0 + 61s);
            break;
        }
        auto after = s.state();
        if (after != before) {
          ASSERT_TRUE(is_declared_transition(before, after))
              << to_string(before) << " -> " << to_string(after);
        }
        if (before == SessionState::kDone || before == SessionState::kFailed) {
          ASSERT_EQ(after, before) << "final states must be absorbing";
        }
        if (s.state() == SessionState::kAwaitInit || s.state() == SessionState::kFailed) {
          ASSERT_FALSE(s.has_keypair());
        }
        if (s.state() == SessionState::kAwaitSigned) ASSERT_TRUE(s.has_keypair());
        if (after == SessionState::kDone && before != SessionState::kDone) {
          ASSERT_TRUE(saw_good_signed);
        }
      }
      if (s.state() == SessionState::kDone) ++done_count;
      run(depth - 1);
      seq.pop_back();
    }
  };
  run(4);
  EXPECT_EQ(sequences, 8u + 64u + 512u + 4096u);
  EXPECT_GT(done_count, 0u);
}

TEST(KeyLeakTest, ScannerFindsPlantedKey) {
  const auto& pki = TestPki::get();
  auto der_str = pki.alice.key.export_der();
  auto pem = pki.alice.key.export_pem();
  std::string hex = pki::to_hex(std::span(reinterpret_cast<const std::uint8_t*>(der_str.data()),
                                          der_str.size()));

  for (const auto& planted : {pem, der_str, hex, pem.substr(pem.find('\n') + 1, 64)}) {
    Transcript t;
    t.record(Direction::kSent, "prefix" + planted + "suffix");
    EXPECT_GT(count_key_material(t, pki.alice.key), 0u);
  }
  Transcript clean;
  clean.record(Direction::kSent, pki.alice.cert.to_pem());
  EXPECT_EQ(count_key_material(clean, pki.alice.key), 0u);
}

TEST(KeyLeakTest, HundredRandomDelegationsLeakNothing) {
  const auto& pki = TestPki::get();
  std::mt19937 rng(20260417);
  std::uniform_int_distribution<int> minutes(1, 24 * 60);
  Harness h;
  for (int i = 0; i < 100; ++i) {
    auto alg = (i % 10 == 9) ? pki::KeyAlgorithm::kRsa2048 : pki::KeyAlgorithm::kEcP256;
    auto now = pki::now_seconds();
    auto user = pki.ca.issue_user(pki::parse_dn("/C=IT/O=Test/CN=user" + std::to_string(i)),
                                  now - 5min, now + 24h * 30, alg);
    auto channel = h.channel_for(user);
    auto result = client_delegate(channel, user.cert, user.key, std::chrono::minutes(minutes(rng)));
    ASSERT_EQ(count_key_material(result.transcript, user.key), 0u) << "iteration " << i;

    auto stored = h.store.get(pki::derive_user_id(user.cert.subject()));
    ASSERT_TRUE(stored);
    auto bundle = pki::parse_proxy_bundle(stored->bundle);
    ASSERT_EQ(count_key_material(result.transcript, bundle.proxy_key), 0u) << "iteration " << i;
  }
}

TEST(ProxyStoreTest, RejectsBundlesThatDoNotValidate) {
  const auto& pki = TestPki::get();
  ProxyStore store(pki.trust);
  auto fresh = pki::generate_keypair();
  auto now = pki::now_seconds();
  auto cert = pki::sign_proxy_csr(pki.alice.cert, pki.alice.key,
                                  pki::create_proxy_csr(pki.alice.cert.subject(), fresh), 1h, now);
  auto bundle = pki::assemble_proxy_bundle(cert, fresh.private_key(), pki.alice.cert);
  EXPECT_THROW(store.put(bundle, now + 2h), StoreError);
  EXPECT_NO_THROW(store.put(bundle, now));
  EXPECT_TRUE(store.valid_at(pki::derive_user_id(pki.alice.cert.subject()), now + 30min));
  EXPECT_FALSE(store.valid_at(pki::derive_user_id(pki.alice.cert.subject()), now + 2h));
}

TEST(ProxyStoreTest, PersistsAndReloads) {
  const auto& pki = TestPki::get();
  TempDir dir;
  auto user = pki::derive_user_id(pki.alice.cert.subject());
  std::string fingerprint;
  {
    Harness h(dir.path());
    auto channel = h.channel_for(pki.alice);
    fingerprint = client_delegate(channel, pki.alice.cert, pki.alice.key, 1h).ack.proxy_fingerprint;
  }
  auto file = dir / (user.str() + ".pem");
  struct stat st {};
  ASSERT_EQ(::stat(file.c_str(), &st), 0);
  EXPECT_EQ(st.st_mode & 0777, 0600u);

  ProxyStore reloaded(pki.trust, {}, dir.path());
  EXPECT_EQ(reloaded.load(), 1u);
  ASSERT_TRUE(reloaded.get(user));
  EXPECT_EQ(reloaded.get(user)->fingerprint, fingerprint);
  reloaded.erase(user);
  EXPECT_FALSE(std::filesystem::exists(file));
}

TEST(ProxyStoreTest, OneBundlePerUser) {
  const auto& pki = TestPki::get();
  Harness h;
  auto channel = h.channel_for(pki.alice);
  client_delegate(channel, pki.alice.cert, pki.alice.key, 1h);
  auto second = client_delegate(channel, pki.alice.cert, pki.alice.key, 2h);
  EXPECT_EQ(h.store.users().size(), 1u);
  EXPECT_EQ(h.store.get(pki::derive_user_id(pki.alice.cert.subject()))->fingerprint,
            second.ack.proxy_fingerprint);
}

}  // namespace
}  // namespace lgrid::delegation
