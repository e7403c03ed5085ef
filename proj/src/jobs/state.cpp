// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#include "lgrid/jobs/state.hpp"

namespace lgrid::jobs {

std::string_view to_string(JobState s) {
  switch (s) {
    case JobState::kSubmitted:
      return "SUBMITTED";
    case JobState::kWaiting:
      return "WAITING";
    case JobState::kReady:
      return "READY";
    case JobState::kScheduled:
      return "SCHEDULED";
    case JobState::kRunning:
      return "RUNNING";
    case JobState::kDoneOk:
      return "DONE_OK";
    case JobState::kDoneFailed:
      return "DONE_FAILED";
    case JobState::kAborted:
      return "ABORTED";
    case JobState::kCancelled:
      return "CANCELLED";
    case JobState::kCleared:
      return "CLEARED";
  }
  return "?";
}

std::optional<JobState> parse_job_state(std::string_view name) {
  for (auto s : kAllJobStates) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

bool is_terminal(JobState s) {
  switch (s) {
    case JobState::kDoneOk:
    case JobState::kDoneFailed:
    case JobState::kAborted:
    case JobState::kCancelled:
    case JobState::kCleared:
      return true;
    default:
      return false;
  }
}

bool is_legal_transition(JobState from, JobState to) {
  using S = JobState;
  if (!is_terminal(from) && (to == S::kAborted || to == S::kCancelled)) return true;
  switch (from) {
    case S::kSubmitted:
      return to == S::kWaiting;
    case S::kWaiting:
      return to == S::kReady;
    case S::kReady:
      return to == S::kScheduled;
    case S::kScheduled:
      return to == S::kRunning;
    case S::kRunning:
      return to == S::kDoneOk || to == S::kDoneFailed;
    case S::kDoneOk:
    case S::kDoneFailed:
      return to == S::kCleared;
    default:
      return false;
  }
}

std::string_view display_color(JobState s) {
  switch (s) {
    case JobState::kRunning:
      return "blue";
    case JobState::kDoneOk:
      return "green";
    case JobState::kAborted:
      return "red";
    case JobState::kCancelled:
      return "orange";
    case JobState::kCleared:
      return "gray";
    default:
      return "neutral";
  }
}

}  // namespace lgrid::jobs
