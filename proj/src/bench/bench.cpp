// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#include "lgrid/bench/bench.hpp"

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "lgrid/client/client.hpp"
#include "lgrid/delegation/myproxy.hpp"
#include "lgrid/pki/authority.hpp"
#include "lgrid/server/servers.hpp"

namespace lgrid::bench {

namespace {

using Clock = std::chrono::steady_clock;
using namespace std::chrono_literals;

constexpr std::string_view kJdl = R"(Executable = "/bin/echo"; Arguments = "bench"; StdOutput = "out.txt";)";
constexpr auto kWait = 30s;

class ScratchDir {
 public:
  explicit ScratchDir(std::filesystem::path given) {
    if (!given.empty()) {
      std::filesystem::create_directories(given);
      path_ = std::move(given);
      return;
    }
    std::string tmpl = (std::filesystem::temp_directory_path() / "lgrid-bench-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
    owned_ = true;
  }
  ~ScratchDir() {
    std::error_code ec;
    if (owned_) std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  bool owned_ = false;
};

struct Setup {
  explicit Setup(const BenchConfig& config)
      : scratch(config.scratch),
        ca(pki::DevAuthority::create(pki::parse_dn("/C=XX/O=lgrid bench/CN=Bench CA"))),
        user(ca.issue_user(pki::parse_dn("/C=XX/O=lgrid bench/CN=Bench User"))),
        host(ca.issue_host(pki::parse_dn("/C=XX/O=lgrid bench/CN=localhost"), {"localhost"}, {"127.0.0.1"})),
        trust(std::vector<pki::Certificate>{ca.certificate()}),
        repository(trust, {host.cert, host.key}) {
    repository.bind("127.0.0.1", 0);
    repository.start();

    gateway::GatewayOptions o;
    o.state_root = scratch.path() / "gateway";
    o.host_name = "localhost";
    o.trust = trust;
    o.executor = std::make_shared<jobs::ScriptedExecutor>(jobs::ScriptedConfig{0ms, {}});
    gateway::VoRule vo{"bench", {"/C=XX/O=lgrid bench/*"}, {}};
    vo.operations = {gateway::Operation::kSubmit, gateway::Operation::kStatus, gateway::Operation::kOutput,
                     gateway::Operation::kCancel};
    o.policy.add(vo);
    o.renewal.external_endpoint = delegation::Endpoint{"127.0.0.1", repository.port()};
    net::ClientTls gateway_tls{trust, net::TlsIdentity{host.cert, host.key}};
    o.repository = [port = repository.port(), gateway_tls, rtt = config.rtt] {
      return net::open_channel("127.0.0.1", port, gateway_tls, std::string(server::kRepositoryPath), {rtt});
    };
    gw = std::make_unique<server::GatewayServer>(std::move(o), net::TlsIdentity{host.cert, host.key});
    gw->bind("127.0.0.1", 0);
    gw->start();
  }

  ~Setup() {
    gw->stop();
    repository.stop();
  }

  ScratchDir scratch;
  pki::DevAuthority ca;
  pki::Identity user;
  pki::Identity host;
  pki::TrustStore trust;
  server::RepositoryServer repository;
  std::unique_ptr<server::GatewayServer> gw;
};

// Submit, wait, fetch: the same three calls in both modes.
void run_job(client::GatewayClient& c) {
  auto ids = c.submit(std::string(kJdl));
  auto st = c.status(ids.at(0).uuid, kWait);
  if (st.state != "DONE_OK") throw std::runtime_error("bench job ended " + st.state);
  if (c.output(ids.at(0).uuid).empty()) throw std::runtime_error("bench job produced no output");
}

BenchSample embedded_once(Setup& s, std::chrono::milliseconds rtt) {
  auto t0 = Clock::now();
  client::GatewayClient c("localhost", s.gw->port(), {s.trust, net::TlsIdentity{s.user.cert, s.user.key}}, {rtt});
  c.delegate(s.user.cert, s.user.key, 12h, s.host.cert.subject());
  run_job(c);
  BenchSample out;
  out.mode = "embedded";
  out.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  out.connections = c.connection().connections_opened();
  out.round_trips = c.connection().round_trips();
  out.bytes = c.connection().transcript().total_bytes();
  return out;
}

BenchSample external_once(Setup& s, std::chrono::milliseconds rtt) {
  static const std::string kUser = "bench";
  static const std::string kPass = "bench passphrase";
  auto t0 = Clock::now();
  delegation::Transcript put;
  {
    auto ch = net::open_channel("localhost", s.repository.port(), {s.trust, net::TlsIdentity{s.user.cert, s.user.key}},
                                std::string(server::kRepositoryPath), {rtt}, s.host.cert.subject());
    delegation::myproxy_put(*ch, kUser, kPass, s.user.cert, s.user.key, 24h, &put);
  }
  client::GatewayClient c("localhost", s.gw->port(), {s.trust, std::nullopt}, {rtt});
  auto login = c.delegate_via_repository(kUser, kPass, 12h);
  run_job(c);
  BenchSample out;
  out.mode = "external";
  out.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  out.connections = put.connection_count() + c.connection().connections_opened() + login.upstream_connections;
  out.round_trips = put.round_trip_count() + c.connection().round_trips() + login.upstream_round_trips;
  out.bytes = put.total_bytes() + c.connection().transcript().total_bytes() + login.upstream_bytes;
  return out;
}

}  // namespace

ModeSummary summarize(const std::string& mode, const std::vector<BenchSample>& samples) {
  ModeSummary m;
  m.mode = mode;
  std::vector<const BenchSample*> mine;
  for (const auto& s : samples) {
    if (s.mode == mode) mine.push_back(&s);
  }
  if (mine.empty()) return m;
  double n = static_cast<double>(mine.size());
  for (const auto* s : mine) {
    m.mean_seconds += s->seconds / n;
    m.mean_connections += s->connections / n;
    m.mean_round_trips += s->round_trips / n;
    m.mean_bytes += static_cast<double>(s->bytes) / n;
  }
  if (mine.size() > 1) {
    double ss = 0;
    for (const auto* s : mine) ss += (s->seconds - m.mean_seconds) * (s->seconds - m.mean_seconds);
    m.stddev_seconds = std::sqrt(ss / (n - 1));
  }
  return m;
}

BenchResult run_bench(const BenchConfig& config) {
  if (config.iterations <= 0) throw std::invalid_argument("iterations must be positive");
  if (!config.embedded && !config.external) throw std::invalid_argument("no mode selected");
  Setup setup(config);
  BenchResult result;
  result.rtt = config.rtt;
  for (int i = 0; i < config.warmup; ++i) {
    if (config.embedded) embedded_once(setup, config.rtt);
    if (config.external) external_once(setup, config.rtt);
  }
  // Alternate modes so slow drift on the host hits both equally.
  for (int i = 0; i < config.iterations; ++i) {
    if (config.embedded) {
      auto e = embedded_once(setup, config.rtt);
      e.iteration = i;
      result.samples.push_back(e);
    }
    if (config.external) {
      auto x = external_once(setup, config.rtt);
      x.iteration = i;
      result.samples.push_back(x);
    }
  }
  result.embedded = summarize("embedded", result.samples);
  result.external = summarize("external", result.samples);
  return result;
}

std::string to_csv(const BenchResult& r) {
  std::ostringstream out;
  out << "mode,iter,seconds,connections,round_trips,bytes\n";
  char buf[64];
  for (const auto& s : r.samples) {
    std::snprintf(buf, sizeof buf, "%.6f", s.seconds);
    out << s.mode << "," << s.iteration << "," << buf << "," << s.connections << "," << s.round_trips << ","
        << s.bytes << "\n";
  }
  return out.str();
}

std::string to_table(const BenchResult& r) {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "rtt %lld ms\n", static_cast<long long>(r.rtt.count()));
  out << buf;
  std::snprintf(buf, sizeof buf, "%-10s %4s %10s %10s %6s %6s %8s\n", "mode", "n", "mean s", "stddev s", "conns", "rtts",
                "bytes");
  out << buf;
  bool both = true;
  for (const auto* m : {&r.embedded, &r.external}) {
    int n = 0;
    for (const auto& s : r.samples) n += s.mode == m->mode;
    if (n == 0) {
      both = false;
      continue;
    }
    std::snprintf(buf, sizeof buf, "%-10s %4d %10.4f %10.4f %6.1f %6.1f %8.0f\n", m->mode.c_str(), n, m->mean_seconds,
                  m->stddev_seconds, m->mean_connections, m->mean_round_trips, m->mean_bytes);
    out << buf;
  }
  if (both) {
    std::snprintf(buf, sizeof buf, "gap (external - embedded): %.4f s\n", r.gap_seconds());
    out << buf;
  }
  return out.str();
}

}  // namespace lgrid::bench
