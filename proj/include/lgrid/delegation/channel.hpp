// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lgrid/pki/certificate.hpp"

namespace lgrid::delegation {

/// The authenticated identity of one end of a secure channel.
struct PeerIdentity {
  pki::DistinguishedName dn;
  /// The end-entity certificate presented during authentication, if any.
  std::optional<pki::Certificate> certificate;
};

class ChannelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Artificial latency: each new connection and each round trip costs one rtt.
struct InjectedLatency {
  std::chrono::milliseconds rtt{0};

  void on_connect() const;
  void on_round_trip() const;
};

/// A mutually authenticated, integrity-protected request/response channel.
/// Requests and responses are complete frames.
class Channel {
 public:
  virtual ~Channel() = default;

  /// One round trip. Throws ChannelError if the far end is unreachable.
  virtual std::string round_trip(std::string_view request) = 0;
  /// The authenticated identity of the far end.
  virtual const PeerIdentity& peer() const = 0;
  virtual int connections_opened() const = 0;
};

using FrameHandler = std::function<std::string(const PeerIdentity& client, std::string_view frame)>;

/// In-process stand-in for a TLS channel. The test harness injects both
/// identities, as if they had come out of certificate authentication.
class LoopbackChannel final : public Channel {
 public:
  LoopbackChannel(FrameHandler server, PeerIdentity client_identity, PeerIdentity server_identity,
                  InjectedLatency latency = {});

  std::string round_trip(std::string_view request) override;
  const PeerIdentity& peer() const override { return server_identity_; }
  int connections_opened() const override { return 1; }

 private:
  FrameHandler server_;
  PeerIdentity client_identity_;
  PeerIdentity server_identity_;
  InjectedLatency latency_;
};

enum class Direction { kSent, kReceived };

struct TranscriptEntry {
  Direction direction;
  std::string payload;
  std::size_t byte_length;
  std::chrono::system_clock::time_point at;
};

/// Everything that crossed one or more channels, in order.
class Transcript {
 public:
  const std::vector<TranscriptEntry>& entries() const noexcept { return entries_; }
  int connection_count() const noexcept { return connections_; }
  int round_trip_count() const noexcept { return round_trips_; }
  std::size_t total_bytes() const noexcept;

  void record(Direction dir, std::string_view payload);
  void add_round_trip() { ++round_trips_; }
  void add_connections(int n) { connections_ += n; }
  /// Appends another transcript, summing its counters.
  void merge(const Transcript& other);

  /// Occurrences of `needle` across all payloads.
  std::size_t count_occurrences(std::string_view needle) const;

 private:
  std::vector<TranscriptEntry> entries_;
  int connections_ = 0;
  int round_trips_ = 0;
};

/// Decorator that records every exchange on `inner` into `transcript`.
class RecordingChannel final : public Channel {
 public:
  RecordingChannel(Channel& inner, Transcript& transcript);

  std::string round_trip(std::string_view request) override;
  const PeerIdentity& peer() const override { return inner_.peer(); }
  int connections_opened() const override { return inner_.connections_opened(); }

  /// Folds connections opened by `inner` into the transcript counter.
  void finish();

 private:
  Channel& inner_;
  Transcript& transcript_;
  bool finished_ = false;
};

/// Number of places where any encoding of `key` appears in `transcript`:
/// the PEM text, each base64 line of it, the raw DER, and the DER in hex.
std::size_t count_key_material(const Transcript& transcript, const pki::PrivateKey& key);

}  // namespace lgrid::delegation
