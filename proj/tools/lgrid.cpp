// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

// lgrid: command-line client, gateway and repository launcher.

#include <fcntl.h>
#include <sys/stat.h>
#include <termios.h>
#include <unistd.h>

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "lgrid/bench/bench.hpp"
#include "lgrid/client/client.hpp"
#include "lgrid/gateway/config.hpp"
#include "lgrid/pki/authority.hpp"
#include "lgrid/pki/credential.hpp"
#include "lgrid/pki/dn.hpp"
#include "lgrid/server/servers.hpp"

namespace fs = std::filesystem;
using namespace lgrid;
using namespace std::chrono_literals;

namespace {

// Exit codes.
constexpr int kOk = 0;
constexpr int kMissingFile = 1;
constexpr int kWrongPassphrase = 2;
constexpr int kUnreachable = 3;
constexpr int kSubstitution = 4;
constexpr int kUnknownJob = 5;
constexpr int kRejected = 6;
constexpr int kFailure = 7;

struct Exit {
  int code;
  std::string message;
};

[[noreturn]] void die(int code, const std::string& message) { throw Exit{code, message}; }

fs::path home() {
  const char* h = std::getenv("HOME");
  return h && *h ? fs::path(h) : fs::current_path();
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) die(kMissingFile, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& data, mode_t mode) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  int fd = ::open(p.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, mode);
  if (fd < 0) die(kFailure, "cannot write " + p.string());
  ::fchmod(fd, mode);
  bool ok = ::write(fd, data.data(), data.size()) == static_cast<ssize_t>(data.size());
  ::close(fd);
  if (!ok) die(kFailure, "short write to " + p.string());
}

std::string read_passphrase(const std::string& file, const char* prompt) {
  if (!file.empty()) {
    auto s = read_file(file);
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
    return s;
  }
  if (const char* env = std::getenv("LGRID_PASSPHRASE")) return env;
  termios old{};
  bool tty = ::isatty(STDIN_FILENO) && ::tcgetattr(STDIN_FILENO, &old) == 0;
  if (tty) {
    std::cerr << prompt << std::flush;
    termios quiet = old;
    quiet.c_lflag &= ~static_cast<tcflag_t>(ECHO);
    ::tcsetattr(STDIN_FILENO, TCSANOW, &quiet);
  }
  std::string line;
  std::getline(std::cin, line);
  if (tty) {
    ::tcsetattr(STDIN_FILENO, TCSANOW, &old);
    std::cerr << "\n";
  }
  return line;
}

std::pair<std::string, int> split_host_port(const std::string& s, int default_port) {
  auto colon = s.rfind(':');
  if (colon == std::string::npos) return {s, default_port};
  try {
    return {s.substr(0, colon), std::stoi(s.substr(colon + 1))};
  } catch (const std::exception&) {
    die(kFailure, "bad host:port " + s);
  }
}

// Options shared by every command that talks to a gateway.
struct Remote {
  std::string gateway;
  std::string ca;
  std::string token_file;
  std::string vo;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--gateway", gateway, "host:port (default $LGRID_GATEWAY, else localhost:8443)");
    cmd->add_option("--ca", ca, "trust anchors PEM (default $LGRID_CA, else ~/.lgrid/ca.pem)");
    cmd->add_option("--token-file", token_file, "token cache (default ~/.lgrid/token)");
    cmd->add_option("--vo", vo, "act within this VO");
  }

  fs::path token_path() const { return token_file.empty() ? home() / ".lgrid" / "token" : fs::path(token_file); }

  pki::TrustStore trust() const {
    fs::path p = ca;
    if (p.empty()) {
      const char* env = std::getenv("LGRID_CA");
      p = env && *env ? fs::path(env) : home() / ".lgrid" / "ca.pem";
    }
    return pki::TrustStore(pki::Certificate::all_from_pem(read_file(p)));
  }

  std::unique_ptr<client::GatewayClient> connect(std::optional<net::TlsIdentity> identity = std::nullopt) const {
    std::string target = gateway;
    if (target.empty()) {
      const char* env = std::getenv("LGRID_GATEWAY");
      target = env && *env ? env : "localhost:" + std::to_string(gateway::kDefaultPort);
    }
    auto [host, port] = split_host_port(target, gateway::kDefaultPort);
    auto c = std::make_unique<client::GatewayClient>(host, port, net::ClientTls{trust(), std::move(identity)});
    if (!vo.empty()) c->set_vo(vo);
    return c;
  }

  std::unique_ptr<client::GatewayClient> authed() const {
    auto c = connect();
    std::ifstream in(token_path());
    std::string token;
    if (!(in >> token)) die(kMissingFile, "no cached token at " + token_path().string() + "; run lgrid delegate");
    c->set_token(token);
    return c;
  }
};

void print_status(const client::JobStatus& s) {
  std::cout << s.id << "  " << s.state << "  " << s.color << "  " << s.last_update << "\n";
}

std::vector<jobs::SandboxEntry> gather_inputs(const fs::path& jdl_path, const std::string& jdl,
                                              const std::vector<std::string>& explicit_inputs) {
  std::vector<jobs::SandboxEntry> out;
  std::set<std::string> seen;
  auto add = [&](const std::string& name, const fs::path& src) {
    if (!seen.insert(name).second) die(kFailure, "two inputs named " + name);
    if (!fs::is_regular_file(src)) die(kMissingFile, "input " + src.string() + " not found");
    out.push_back({name, read_file(src)});
  };
  if (!explicit_inputs.empty()) {
    for (const auto& p : explicit_inputs) add(fs::path(p).filename().string(), p);
    return out;
  }
  auto descriptor = jobs::parse_jdl(jdl);
  std::vector<const jobs::JobDescriptor*> pending{&descriptor};
  while (!pending.empty()) {
    const auto* d = pending.back();
    pending.pop_back();
    for (const auto& name : d->string_list("InputSandbox")) {
      if (name.find(jobs::kParamPlaceholder) != std::string::npos || seen.count(name)) continue;
      add(name, jdl_path.parent_path() / name);
    }
    for (const auto& n : d->nodes) pending.push_back(&n);
  }
  return out;
}

int run_server_until_signal(const std::function<void()>& stop) {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  int sig = 0;
  sigwait(&set, &sig);
  std::cerr << "lgrid: signal " << sig << ", shutting down\n";
  stop();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  // Servers wait for signals with sigwait; block them before any thread starts.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  std::signal(SIGPIPE, SIG_IGN);

  CLI::App app{"lgrid: grid gateway client and services"};
  app.require_subcommand(1);
  std::function<int()> action;

  // convert ------------------------------------------------------------------
  std::string p12, out_dir = (home() / ".globus").string(), pass_file;
  auto* convert = app.add_subcommand("convert", "Unpack a PKCS#12 container into usercert.pem and userkey.pem");
  convert->add_option("--p12", p12, "the container")->required();
  convert->add_option("--out", out_dir, "output directory")->capture_default_str();
  convert->add_option("--passphrase-file", pass_file, "read the passphrase from a file (else $LGRID_PASSPHRASE, else stdin)");
  convert->callback([&] {
    action = [&] {
      if (!fs::is_regular_file(p12)) die(kMissingFile, p12 + ": no such file");
      auto bytes = read_file(p12);
      auto pass = read_passphrase(pass_file, "PKCS#12 passphrase: ");
      try {
        pki::write_pem_credential(pki::convert_credential_container(bytes, pass), out_dir);
      } catch (const pki::CredentialError& e) {
        die(e.kind() == pki::CredentialError::Kind::kWrongPassphrase ? kWrongPassphrase : kFailure, e.what());
      }
      std::cout << (fs::path(out_dir) / "usercert.pem").string() << "\n" << (fs::path(out_dir) / "userkey.pem").string() << "\n";
      return kOk;
    };
  });

  // delegate -----------------------------------------------------------------
  Remote remote;
  std::string cert_path, key_path, server_dn;
  double lifetime_hours = 12;
  auto* delegate = app.add_subcommand("delegate", "Sign a proxy for the gateway and cache the session token");
  remote.add_to(delegate);
  delegate->add_option("--cert", cert_path, "user certificate (default ~/.globus/usercert.pem)");
  delegate->add_option("--key", key_path, "user key (default ~/.globus/userkey.pem)");
  delegate->add_option("--lifetime", lifetime_hours, "proxy lifetime in hours")->capture_default_str();
  delegate->add_option("--server-dn", server_dn, "refuse to delegate unless the gateway certificate has this DN");
  delegate->callback([&] {
    action = [&] {
      fs::path cert = cert_path.empty() ? home() / ".globus" / "usercert.pem" : fs::path(cert_path);
      fs::path key = key_path.empty() ? home() / ".globus" / "userkey.pem" : fs::path(key_path);
      for (const auto& p : {cert, key}) {
        if (!fs::is_regular_file(p)) die(kMissingFile, p.string() + ": no such file");
      }
      auto cred = pki::load_user_credential(cert, key);
      std::optional<pki::DistinguishedName> expected;
      if (!server_dn.empty()) expected = pki::parse_dn(server_dn);
      auto c = remote.connect(net::TlsIdentity{cred.cert, cred.key});
      auto lifetime = std::chrono::seconds(static_cast<long long>(lifetime_hours * 3600));
      client::Delegation d;
      try {
        d = c->delegate(cred.cert, cred.key, lifetime, expected);
      } catch (const delegation::ChannelError&) {
        const auto& seen = c->connection().server_certificate();
        if (!expected || !seen || seen->subject() == *expected) throw;
        die(kSubstitution, "refusing to delegate: gateway presented " + seen->subject().str() + ", expected " +
                               expected->str());
      }
      write_file(remote.token_path(), d.token + "\n", 0600);
      std::cout << "proxy fingerprint: " << d.ack.proxy_fingerprint << "\n"
                << "valid until:       " << jobs::format_iso8601(jobs::TimePoint(std::chrono::seconds(d.ack.not_after)))
                << "\n"
                << "token:             " << d.token << "\n";
      return kOk;
    };
  });

  // submit -------------------------------------------------------------------
  std::string jdl_path;
  std::vector<std::string> inputs;
  auto* submit = app.add_subcommand("submit", "Submit a JDL job, with its input sandbox");
  remote.add_to(submit);
  submit->add_option("--jdl", jdl_path, "job description")->required();
  submit->add_option("--input", inputs, "input files (default: InputSandbox, relative to the JDL file)");
  submit->callback([&] {
    action = [&] {
      auto jdl = read_file(jdl_path);
      std::vector<jobs::SandboxEntry> entries;
      try {
        entries = gather_inputs(jdl_path, jdl, inputs);
      } catch (const jobs::JdlError& e) {
        die(kRejected, jdl_path + ":" + std::to_string(e.line()) + ":" + std::to_string(e.column()) + ": " + e.what());
      }
      auto c = remote.authed();
      for (const auto& j : c->submit(jdl, entries)) std::cout << j.id << "\n";
      return kOk;
    };
  });

  // status / watch / output / cancel -------------------------------------------
  std::string job_id;
  bool all = false;
  int wait_seconds = 0;
  auto* status = app.add_subcommand("status", "Show job state");
  remote.add_to(status);
  auto* id_opt = status->add_option("--id", job_id, "job id or uuid");
  status->add_flag("--all", all, "every job of yours")->excludes(id_opt);
  status->add_option("--wait", wait_seconds, "block up to this many seconds for a terminal state");
  status->callback([&] {
    action = [&] {
      auto c = remote.authed();
      if (all || job_id.empty()) {
        for (const auto& s : c->list()) print_status(s);
        return kOk;
      }
      auto s = c->status(job_id, wait_seconds > 0 ? std::optional(std::chrono::seconds(wait_seconds)) : std::nullopt);
      print_status(s);
      for (const auto& h : s.history) std::cout << "  " << h.at << "  " << h.state << "  " << h.reason << "\n";
      if (s.exit_code) std::cout << "  exit code " << *s.exit_code << "\n";
      return kOk;
    };
  });

  double interval = 1.0;
  auto* watch = app.add_subcommand("watch", "Poll a job until it reaches a terminal state");
  remote.add_to(watch);
  watch->add_option("--id", job_id, "job id or uuid")->required();
  watch->add_option("--interval", interval, "seconds between polls")->capture_default_str();
  watch->callback([&] {
    action = [&] {
      auto c = remote.authed();
      std::string last;
      for (;;) {
        auto s = c->status(job_id);
        if (s.state != last) print_status(s);
        last = s.state;
        if (client::is_terminal_state(s.state)) return kOk;
        std::this_thread::sleep_for(std::chrono::duration<double>(interval));
      }
    };
  });

  std::string dest = ".";
  auto* output = app.add_subcommand("output", "Download and unpack a finished job's output sandbox");
  remote.add_to(output);
  output->add_option("--id", job_id, "job id or uuid")->required();
  output->add_option("--dest", dest, "destination directory")->capture_default_str();
  output->callback([&] {
    action = [&] {
      auto c = remote.authed();
      auto files = jobs::unpack(c->output(job_id));
      for (const auto& f : files) {
        auto path = fs::path(dest) / jobs::checked_relative_path(f.path);
        write_file(path, f.bytes, 0644);
        std::cout << path.string() << "\n";
      }
      return kOk;
    };
  });

  auto* cancel = app.add_subcommand("cancel", "Cancel a job");
  remote.add_to(cancel);
  cancel->add_option("--id", job_id, "job id or uuid")->required();
  cancel->callback([&] {
    action = [&] {
      print_status(remote.authed()->cancel(job_id));
      return kOk;
    };
  });

  // bench --------------------------------------------------------------------
  int rtt_ms = 0, iterations = 20;
  std::string mode = "both", csv_path;
  auto* bench = app.add_subcommand("bench", "Time embedded against external delegation over loopback");
  bench->add_option("--rtt", rtt_ms, "injected latency per connection and round trip, ms")->capture_default_str();
  bench->add_option("--iterations", iterations, "timed iterations per mode")->capture_default_str();
  bench->add_option("--mode", mode, "embedded, external or both")
      ->check(CLI::IsMember({"embedded", "external", "both"}))
      ->capture_default_str();
  bench->add_option("--csv", csv_path, "also write per-iteration samples here");
  bench->callback([&] {
    action = [&] {
      bench::BenchConfig config;
      config.rtt = std::chrono::milliseconds(rtt_ms);
      config.iterations = iterations;
      config.embedded = mode != "external";
      config.external = mode != "embedded";
      auto r = bench::run_bench(config);
      std::cout << bench::to_table(r);
      if (!csv_path.empty()) {
        write_file(csv_path, bench::to_csv(r), 0644);
      } else {
        std::cout << "\n" << bench::to_csv(r);
      }
      return kOk;
    };
  });

  // serve --------------------------------------------------------------------
  std::string config_path;
  int port_override = -1;
  auto* serve = app.add_subcommand("serve", "Run the gateway");
  serve->add_option("--config", config_path, "gateway configuration file")->required();
  serve->add_option("--port", port_override, "listen on this port instead");
  serve->callback([&] {
    action = [&] {
      if (!fs::is_regular_file(config_path)) die(kMissingFile, config_path + ": no such file");
      auto config = gateway::load_config(config_path);
      if (port_override >= 0) config.port = port_override;
      auto configured = server::configure(config);
      server::GatewayServer s(std::move(configured.options), configured.identity, config.maintenance_interval);
      int port = s.bind(config.listen, config.port);
      auto restored = s.start();
      std::cerr << "lgrid: restored " << restored.proxies << " proxies, " << restored.tokens << " tokens, "
                << restored.jobs << " jobs\n";
      std::cerr << "lgrid: gateway on " << config.listen << ":" << port << ", state in " << config.state_root.string()
                << "\n";
      return run_server_until_signal([&] { s.stop(); });
    };
  });

  std::string listen = "127.0.0.1:" + std::to_string(delegation::kMyProxyPort), host_cert, host_key, ca_path;
  auto* sim = app.add_subcommand("myproxy-sim", "Run the external credential repository simulator");
  sim->add_option("--listen", listen, "host:port")->capture_default_str();
  sim->add_option("--cert", host_cert, "host certificate")->required();
  sim->add_option("--key", host_key, "host key")->required();
  sim->add_option("--ca", ca_path, "trust anchors")->required();
  sim->callback([&] {
    action = [&] {
      auto cred = pki::load_user_credential(host_cert, host_key);
      pki::TrustStore trust(pki::Certificate::all_from_pem(read_file(ca_path)));
      server::RepositoryServer s(trust, {cred.cert, cred.key});
      auto [host, port] = split_host_port(listen, delegation::kMyProxyPort);
      port = s.bind(host, port);
      s.start();
      std::cerr << "lgrid: repository on " << host << ":" << port << "\n";
      return run_server_until_signal([&] { s.stop(); });
    };
  });

  // devcerts -----------------------------------------------------------------
  std::string dev_dir = "lgrid-dev", user_dn = "/C=XX/O=lgrid dev/CN=Dev User", host_name = "localhost";
  auto* devcerts = app.add_subcommand("devcerts", "Create a throwaway CA, host and user credentials, and a config");
  devcerts->add_option("--out", dev_dir, "output directory")->capture_default_str();
  devcerts->add_option("--user-dn", user_dn, "user subject")->capture_default_str();
  devcerts->add_option("--host", host_name, "gateway host name")->capture_default_str();
  devcerts->add_option("--passphrase-file", pass_file, "passphrase for user.p12 (else $LGRID_PASSPHRASE, else stdin)");
  devcerts->callback([&] {
    action = [&] {
      auto pass = read_passphrase(pass_file, "passphrase for user.p12: ");
      auto ca = pki::DevAuthority::create(pki::parse_dn("/C=XX/O=lgrid dev/CN=lgrid dev CA"));
      auto user = ca.issue_user(pki::parse_dn(user_dn));
      auto host = ca.issue_host(pki::parse_dn("/C=XX/O=lgrid dev/CN=" + host_name), {host_name, "localhost"}, {"127.0.0.1"});
      fs::path d = dev_dir;
      write_file(d / "ca.pem", ca.certificate().to_pem(), 0644);
      write_file(d / "hostcert.pem", host.cert.to_pem(), 0644);
      write_file(d / "hostkey.pem", host.key.export_pem(), 0600);
      write_file(d / "usercert.pem", user.cert.to_pem(), 0644);
      write_file(d / "userkey.pem", user.key.export_pem(), 0600);
      write_file(d / "user.p12", pki::make_pkcs12(user.cert, &user.key, pass), 0600);
      write_file(d / "gateway.toml",
                 "port = 8443\n"
                 "state_root = \"state\"\n"
                 "host_name = \"" + host_name + "\"\n"
                 "host_cert = \"hostcert.pem\"\n"
                 "host_key = \"hostkey.pem\"\n"
                 "trust_anchors = \"ca.pem\"\n"
                 "executor = \"local\"\n"
                 "myproxy = \"127.0.0.1:" + std::to_string(delegation::kMyProxyPort) + "\"\n"
                 "\n"
                 "[vo.dev]\n"
                 "members = [\"/C=XX/O=lgrid dev/*\"]\n"
                 "operations = [\"submit\", \"status\", \"output\", \"cancel\"]\n",
                 0644);
      std::cout << d.string() << "\n";
      return kOk;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    return action();
  } catch (const Exit& e) {
    std::cerr << "lgrid: " << e.message << "\n";
    return e.code;
  } catch (const delegation::DelegationError& e) {
    using K = delegation::DelegationError::Kind;
    if (e.kind() == K::kSubstitution) {
      std::cerr << "lgrid: refusing to sign: " << e.what()
                << "\nThe gateway asked for a certificate that is not a proxy of your own identity.\n";
      return kSubstitution;
    }
    std::cerr << "lgrid: delegation failed: " << e.what() << "\n";
    return kRejected;
  } catch (const delegation::ChannelError& e) {
    std::cerr << "lgrid: gateway unreachable: " << e.what() << "\n";
    return kUnreachable;
  } catch (const client::ApiError& e) {
    std::cerr << "lgrid: " << e.what() << "\n";
    return e.status() == 404 ? kUnknownJob : kRejected;
  } catch (const pki::CredentialError& e) {
    std::cerr << "lgrid: " << e.what() << "\n";
    return e.kind() == pki::CredentialError::Kind::kWrongPassphrase ? kWrongPassphrase : kFailure;
  } catch (const std::exception& e) {
    std::cerr << "lgrid: " << e.what() << "\n";
    return kFailure;
  }
}
