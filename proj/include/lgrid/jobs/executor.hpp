// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "lgrid/jobs/record.hpp"
#include "lgrid/jobs/sandbox.hpp"

namespace lgrid::jobs {

/// One transition proposed by an executor.
struct Step {
  JobState next;
  std::string reason;
  std::optional<int> exit_code;
  /// Files to place in the job's work directory before the transition.
  std::vector<SandboxEntry> produced;
};

/// Stands in for the Grid. Implementations decide when a job moves on; the
/// JobManager applies and persists the move.
class Executor {
 public:
  virtual ~Executor() = default;

  /// Proposes at most one transition for a non-terminal job. Must not block.
  virtual std::optional<Step> poll(const JobRecord& job, TimePoint now) = 0;
  /// Stops whatever runs on behalf of the job. Idempotent.
  virtual void cancel(const JobRecord& job) = 0;
  /// Called for each non-terminal job found on disk at startup.
  virtual std::optional<Step> recover(const JobRecord& job) = 0;
};

struct ScriptedOutcome {
  enum class Kind { kSucceed, kFail, kAbort };
  Kind kind = Kind::kSucceed;
  int exit_code = 0;
  std::string reason;
};

struct ScriptedConfig {
  /// Time spent in each pre-terminal state.
  std::chrono::milliseconds stage_delay{200};
  /// Decides how RUNNING ends. Defaults to success.
  std::function<ScriptedOutcome(const JobRecord&)> outcome;
};

/// Walks jobs through the lifecycle on a timer without running anything.
/// A job whose Executable is "echo" or "/bin/echo" gets its Arguments, plus a
/// newline, written to StdOutput, so end-to-end flows have output to fetch.
class ScriptedExecutor final : public Executor {
 public:
  explicit ScriptedExecutor(ScriptedConfig config = {});

  std::optional<Step> poll(const JobRecord& job, TimePoint now) override;
  void cancel(const JobRecord&) override {}
  std::optional<Step> recover(const JobRecord&) override { return std::nullopt; }

 private:
  ScriptedConfig config_;
};

/// Runs the Executable as a local process in the job's work directory, with
/// StdInput/StdOutput/StdError redirected to files there. The pre-RUNNING
/// states pass through immediately.
class LocalExecutor final : public Executor {
 public:
  LocalExecutor() = default;
  ~LocalExecutor() override;

  std::optional<Step> poll(const JobRecord& job, TimePoint now) override;
  void cancel(const JobRecord& job) override;
  /// A RUNNING job whose process belonged to a previous gateway is aborted.
  std::optional<Step> recover(const JobRecord& job) override;

  std::size_t running() const;

 private:
  Step launch(const JobRecord& job);

  mutable std::mutex mu_;
  std::map<std::string, int> pids_;  // uuid -> pid
};

/// Splits an Arguments string on whitespace, honoring single and double quotes.
std::vector<std::string> split_arguments(std::string_view args);

}  // namespace lgrid::jobs
