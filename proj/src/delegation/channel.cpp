// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#include "lgrid/delegation/channel.hpp"

#include <numeric>
#include <sstream>
#include <thread>

#include "lgrid/pki/digest.hpp"

namespace lgrid::delegation {

void InjectedLatency::on_connect() const {
  if (rtt.count() > 0) std::this_thread::sleep_for(rtt);
}

void InjectedLatency::on_round_trip() const {
  if (rtt.count() > 0) std::this_thread::sleep_for(rtt);
}

LoopbackChannel::LoopbackChannel(FrameHandler server, PeerIdentity client_identity,
                                 PeerIdentity server_identity, InjectedLatency latency)
    : server_(std::move(server)),
      client_identity_(std::move(client_identity)),
      server_identity_(std::move(server_identity)),
      latency_(latency) {
  if (!server_) throw ChannelError("loopback channel has no server");
  latency_.on_connect();
}

std::string LoopbackChannel::round_trip(std::string_view request) {
  latency_.on_round_trip();
  return server_(client_identity_, request);
}

std::size_t Transcript::total_bytes() const noexcept {
  return std::accumulate(entries_.begin(), entries_.end(), std::size_t{0},
                         [](std::size_t acc, const auto& e) { return acc + e.byte_length; });
}

void Transcript::record(Direction dir, std::string_view payload) {
  entries_.push_back({dir, std::string(payload), payload.size(), std::chrono::system_clock::now()});
}

void Transcript::merge(const Transcript& other) {
  entries_.insert(entries_.end(), other.entries_.begin(), other.entries_.end());
  connections_ += other.connections_;
  round_trips_ += other.round_trips_;
}

std::size_t Transcript::count_occurrences(std::string_view needle) const {
  if (needle.empty()) return 0;
  std::size_t hits = 0;
  for (const auto& e : entries_) {
    for (auto pos = e.payload.find(needle); pos != std::string::npos;
         pos = e.payload.find(needle, pos + 1)) {
      ++hits;
    }
  }
  return hits;
}

RecordingChannel::RecordingChannel(Channel& inner, Transcript& transcript)
    : inner_(inner), transcript_(transcript) {}

std::string RecordingChannel::round_trip(std::string_view request) {
  transcript_.record(Direction::kSent, request);
  auto response = inner_.round_trip(request);
  transcript_.record(Direction::kReceived, response);
  transcript_.add_round_trip();
  return response;
}

void RecordingChannel::finish() {
  if (finished_) return;
  finished_ = true;
  transcript_.add_connections(inner_.connections_opened());
}

std::size_t count_key_material(const Transcript& transcript, const pki::PrivateKey& key) {
  auto pem = key.export_pem();
  auto der = key.export_der();
  std::size_t hits = transcript.count_occurrences(pem) + transcript.count_occurrences(der) +
                     transcript.count_occurrences(pki::to_hex(std::span(
                         reinterpret_cast<const std::uint8_t*>(der.data()), der.size())));
  std::istringstream lines(pem);
  for (std::string line; std::getline(lines, line);) {
    // Short trailing lines could match by accident; full 64-char lines can't.
    if (line.rfind("-----", 0) == 0 || line.size() < 32) continue;
    hits += transcript.count_occurrences(line);
  }
  return hits;
}

}  // namespace lgrid::delegation
