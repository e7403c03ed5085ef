// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lgrid/jobs/executor.hpp"
#include "lgrid/jobs/home.hpp"
#include "lgrid/jobs/jdl.hpp"
#include "lgrid/jobs/record.hpp"
#include "lgrid/jobs/sandbox.hpp"

namespace lgrid::jobs {

class JobError : public std::runtime_error {
 public:
  enum class Kind {
    kNotAuthorized,    // no valid proxy for the owner
    kInvalid,          // descriptor does not expand
    kSandbox,          // input archive rejected
    kNotFound,
    kNotOwner,
    kWrongState,       // e.g. output of a RUNNING job
    kAlreadyTerminal,  // cancel of a finished job
  };

  JobError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

std::string_view to_string(JobError::Kind k);

struct ManagerConfig {
  std::filesystem::path state_root;
  std::string host = "localhost";
  std::function<TimePoint()> clock = now_ms;
  /// Fingerprint of a currently valid proxy for the user, if there is one.
  /// Submission is refused without it.
  std::function<std::optional<std::string>(const pki::UserId&)> proxy_lookup;
  FsObserver observer;
};

/// Owns every JobRecord. Records live on disk as
///
///   homes/<UserId>/jobs/<uuid>/{descriptor.jdl, record.json, status.log,
///                               input/, work/, output/}
///
/// and are written before any call that changes them returns.
class JobManager {
 public:
  JobManager(ManagerConfig config, std::shared_ptr<Executor> executor);

  /// Expands the descriptor and creates one SUBMITTED job per concrete job.
  std::vector<JobId> submit(const JobDescriptor& descriptor, const pki::DistinguishedName& owner,
                            const std::vector<SandboxEntry>& input);

  /// Applies at most one transition proposed by the executor. Returns the
  /// new state if one was applied.
  std::optional<JobState> advance(const JobId& id);
  /// advance() on every non-terminal job; returns the number of transitions.
  std::size_t tick();
  /// Ticks until no job is left non-terminal or the timeout passes.
  bool settle(std::chrono::milliseconds timeout,
              std::chrono::milliseconds interval = std::chrono::milliseconds(5));

  JobRecord status(const JobId& id, const pki::DistinguishedName& requester) const;
  /// The requester's jobs in submission order.
  std::vector<JobRecord> list(const pki::DistinguishedName& owner) const;
  JobRecord cancel(const JobId& id, const pki::DistinguishedName& requester);
  /// Packs OutputSandbox plus StdOutput/StdError, moves the job to CLEARED
  /// and purges its files. Missing outputs are named in MISSING_OUTPUTS.txt.
  std::string fetch_output(const JobId& id, const pki::DistinguishedName& requester);
  /// System-initiated abort of a non-terminal job.
  std::optional<JobRecord> abort(const JobId& id, const std::string& reason);

  /// Resolves "lgrid://host/uuid" or a bare uuid to a known job.
  std::optional<JobId> resolve(std::string_view text) const;
  std::vector<JobRecord> snapshot() const;
  /// Forgets in-memory state and rebuilds it from disk. Returns the number
  /// of jobs loaded. Directories without a complete record are skipped.
  std::size_t reload();

  const HomeFs& fs() const noexcept { return fs_; }
  Executor& executor() noexcept { return *executor_; }

 private:
  struct Slot {
    explicit Slot(JobRecord r) : record(std::move(r)) {}
    std::mutex mu;
    JobRecord record;
  };

  std::shared_ptr<Slot> find(const JobId& id) const;
  std::shared_ptr<Slot> owned(const JobId& id, const pki::DistinguishedName& requester) const;
  void apply(JobRecord& r, Step step);
  void persist_record(const JobRecord& r) const;
  void stage_inputs(const JobRecord& r) const;
  void harvest_outputs(const JobRecord& r) const;
  void purge(const JobRecord& r) const;
  std::optional<JobRecord> load_job(const pki::UserId& owner, const std::filesystem::path& dir) const;

  ManagerConfig config_;
  std::shared_ptr<Executor> executor_;
  HomeFs fs_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Slot>> jobs_;  // by uuid
  std::atomic<std::uint64_t> next_seq_{1};
};

/// Output files a job is expected to produce: OutputSandbox, StdOutput, StdError.
std::vector<std::string> expected_outputs(const JobDescriptor& d);

}  // namespace lgrid::jobs
