// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace lgrid::bench {

// Compares the two ways a user's proxy can reach the gateway, each followed
// by one echo job (submit, wait, fetch output):
//
//   embedded  client -> gateway /delegate, then the job calls
//   external  client -> repository put; client -> gateway /delegate/myproxy;
//             gateway -> repository get; then the job calls
//
// Everything runs in-process over loopback HTTPS. Each new connection and
// each round trip, on every hop, sleeps `rtt`.

struct BenchConfig {
  std::chrono::milliseconds rtt{0};
  int iterations = 20;
  bool embedded = true;
  bool external = true;
  /// Untimed iterations per mode before measuring.
  int warmup = 1;
  /// Gateway state goes under here; a temporary directory when empty.
  std::filesystem::path scratch;
};

struct BenchSample {
  std::string mode;  // "embedded" or "external"
  int iteration = 0;
  double seconds = 0;
  int connections = 0;
  int round_trips = 0;
  std::size_t bytes = 0;
};

struct ModeSummary {
  std::string mode;
  double mean_seconds = 0;
  double stddev_seconds = 0;
  double mean_connections = 0;
  double mean_round_trips = 0;
  double mean_bytes = 0;
};

struct BenchResult {
  std::chrono::milliseconds rtt{0};
  std::vector<BenchSample> samples;
  ModeSummary embedded;
  ModeSummary external;

  /// external mean minus embedded mean; meaningful only when both ran.
  double gap_seconds() const { return external.mean_seconds - embedded.mean_seconds; }
};

BenchResult run_bench(const BenchConfig& config);

ModeSummary summarize(const std::string& mode, const std::vector<BenchSample>& samples);

/// mode,iter,seconds,connections,round_trips,bytes
std::string to_csv(const BenchResult& result);
std::string to_table(const BenchResult& result);

}  // namespace lgrid::bench
