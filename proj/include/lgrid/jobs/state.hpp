// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace lgrid::jobs {

enum class JobState {
  kSubmitted,
  kWaiting,
  kReady,
  kScheduled,
  kRunning,
  kDoneOk,
  kDoneFailed,
  kAborted,
  kCancelled,
  kCleared,
};

inline constexpr std::array<JobState, 10> kAllJobStates = {
    JobState::kSubmitted, JobState::kWaiting,    JobState::kReady,   JobState::kScheduled,
    JobState::kRunning,   JobState::kDoneOk,     JobState::kDoneFailed,
    JobState::kAborted,   JobState::kCancelled,  JobState::kCleared,
};

/// Upper-case wire names: SUBMITTED, ..., DONE_OK, DONE_FAILED, ...
std::string_view to_string(JobState s);
std::optional<JobState> parse_job_state(std::string_view name);

/// No further transitions except DONE_* -> CLEARED.
bool is_terminal(JobState s);
/// The only edges a job may take:
///   SUBMITTED -> WAITING -> READY -> SCHEDULED -> RUNNING -> DONE_OK | DONE_FAILED
///   non-terminal -> ABORTED | CANCELLED
///   DONE_OK | DONE_FAILED -> CLEARED
bool is_legal_transition(JobState from, JobState to);

/// Display color shared by the CLI and the web monitor.
std::string_view display_color(JobState s);

}  // namespace lgrid::jobs
