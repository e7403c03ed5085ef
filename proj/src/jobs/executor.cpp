// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#include "lgrid/jobs/executor.hpp"

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstring>

extern char** environ;

namespace lgrid::jobs {

namespace {

std::optional<JobState> next_stage(JobState s) {
  switch (s) {
    case JobState::kSubmitted:
      return JobState::kWaiting;
    case JobState::kWaiting:
      return JobState::kReady;
    case JobState::kReady:
      return JobState::kScheduled;
    case JobState::kScheduled:
      return JobState::kRunning;
    default:
      return std::nullopt;
  }
}

std::string_view stage_reason(JobState next) {
  switch (next) {
    case JobState::kWaiting:
      return "accepted";
    case JobState::kReady:
      return "matched";
    case JobState::kScheduled:
      return "queued";
    case JobState::kRunning:
      return "started";
    default:
      return "";
  }
}

Step finished(int code) {
  return Step{code == 0 ? JobState::kDoneOk : JobState::kDoneFailed,
              "exit code " + std::to_string(code), code, {}};
}

}  // namespace

std::vector<std::string> split_arguments(std::string_view args) {
  std::vector<std::string> out;
  std::string cur;
  bool in_token = false;
  char quote = 0;
  for (char c : args) {
    if (quote) {
      if (c == quote) {
        quote = 0;
      } else {
        cur += c;
      }
    } else if (c == '\'' || c == '"') {
      quote = c;
      in_token = true;
    } else if (c == ' ' || c == '\t' || c == '\n') {
      if (in_token) out.push_back(std::move(cur));
      cur.clear();
      in_token = false;
    } else {
      cur += c;
      in_token = true;
    }
  }
  if (in_token) out.push_back(std::move(cur));
  return out;
}

// ---- scripted ----

ScriptedExecutor::ScriptedExecutor(ScriptedConfig config) : config_(std::move(config)) {}

std::optional<Step> ScriptedExecutor::poll(const JobRecord& job, TimePoint now) {
  if (is_terminal(job.state) || job.history.empty()) return std::nullopt;
  if (now - job.history.back().at < config_.stage_delay) return std::nullopt;

  if (auto next = next_stage(job.state)) return Step{*next, std::string(stage_reason(*next)), {}, {}};

  // RUNNING
  ScriptedOutcome outcome = config_.outcome ? config_.outcome(job) : ScriptedOutcome{};
  switch (outcome.kind) {
    case ScriptedOutcome::Kind::kAbort:
      return Step{JobState::kAborted, outcome.reason.empty() ? "aborted by executor" : outcome.reason,
                  {}, {}};
    case ScriptedOutcome::Kind::kFail:
      return finished(outcome.exit_code == 0 ? 1 : outcome.exit_code);
    case ScriptedOutcome::Kind::kSucceed:
      break;
  }
  Step step = finished(0);
  auto exe = job.descriptor.string_attr("Executable").value_or("");
  auto out = job.descriptor.string_attr("StdOutput");
  if ((exe == "echo" || exe == "/bin/echo") && out) {
    auto args = split_arguments(job.descriptor.string_attr("Arguments").value_or(""));
    std::string line;
    for (std::size_t i = 0; i < args.size(); ++i) line += (i ? " " : "") + args[i];
    step.produced.push_back({*out, line + "\n"});
  }
  return step;
}

// ---- local ----

LocalExecutor::~LocalExecutor() {
  std::lock_guard lock(mu_);
  for (auto& [_, pid] : pids_) {
    ::kill(-pid, SIGKILL);
    ::waitpid(pid, nullptr, 0);
  }
}

std::size_t LocalExecutor::running() const {
  std::lock_guard lock(mu_);
  return pids_.size();
}

std::optional<Step> LocalExecutor::poll(const JobRecord& job, TimePoint) {
  if (is_terminal(job.state)) return std::nullopt;
  if (job.state == JobState::kScheduled) return launch(job);
  if (auto next = next_stage(job.state)) return Step{*next, std::string(stage_reason(*next)), {}, {}};

  // RUNNING
  int pid;
  {
    std::lock_guard lock(mu_);
    auto it = pids_.find(job.id.uuid);
    if (it == pids_.end()) return Step{JobState::kAborted, "process lost", {}, {}};
    pid = it->second;
  }
  int status = 0;
  int rc = ::waitpid(pid, &status, WNOHANG);
  if (rc == 0) return std::nullopt;
  {
    std::lock_guard lock(mu_);
    pids_.erase(job.id.uuid);
  }
  if (rc < 0) return Step{JobState::kAborted, std::string("waitpid: ") + std::strerror(errno), {}, {}};
  if (WIFEXITED(status)) return finished(WEXITSTATUS(status));
  int sig = WIFSIGNALED(status) ? WTERMSIG(status) : 0;
  Step s = finished(128 + sig);
  s.reason = "killed by signal " + std::to_string(sig);
  return s;
}

Step LocalExecutor::launch(const JobRecord& job) {
  auto fail = [](const std::string& why) {
    return Step{JobState::kAborted, "launch failure: " + why, {}, {}};
  };
  auto exe = job.descriptor.string_attr("Executable");
  if (!exe || exe->empty()) return fail("no Executable");

  auto work = job.work_dir();
  std::string program = *exe;
  if (program.find('/') == std::string::npos && std::filesystem::exists(work / program)) {
    program = "./" + program;
  }

  std::vector<std::string> args{program};
  for (auto& a : split_arguments(job.descriptor.string_attr("Arguments").value_or(""))) {
    args.push_back(std::move(a));
  }
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);

  auto redirect = [&](const char* attr) -> std::string {
    auto v = job.descriptor.string_attr(attr);
    if (!v) return "/dev/null";
    return checked_relative_path(*v);
  };
  std::string in, out, err;
  try {
    in = redirect("StdInput");
    out = redirect("StdOutput");
    err = redirect("StdError");
  } catch (const SandboxError& e) {
    return fail(e.what());
  }

  posix_spawn_file_actions_t fa;
  posix_spawn_file_actions_init(&fa);
  posix_spawn_file_actions_addchdir_np(&fa, work.c_str());
  posix_spawn_file_actions_addopen(&fa, 0, in.c_str(), O_RDONLY, 0);
  posix_spawn_file_actions_addopen(&fa, 1, out.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  posix_spawn_file_actions_addopen(&fa, 2, err.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);

  posix_spawnattr_t attr;
  posix_spawnattr_init(&attr);
  posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
  posix_spawnattr_setpgroup(&attr, 0);

  pid_t pid = 0;
  int rc = ::posix_spawnp(&pid, program.c_str(), &fa, &attr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&fa);
  posix_spawnattr_destroy(&attr);
  if (rc != 0) return fail(program + ": " + std::strerror(rc));

  std::lock_guard lock(mu_);
  pids_[job.id.uuid] = pid;
  return Step{JobState::kRunning, "started pid " + std::to_string(pid), {}, {}};
}

void LocalExecutor::cancel(const JobRecord& job) {
  int pid;
  {
    std::lock_guard lock(mu_);
    auto it = pids_.find(job.id.uuid);
    if (it == pids_.end()) return;
    pid = it->second;
    pids_.erase(it);
  }
  ::kill(-pid, SIGKILL);
  ::waitpid(pid, nullptr, 0);
}

std::optional<Step> LocalExecutor::recover(const JobRecord& job) {
  if (job.state != JobState::kRunning) return std::nullopt;
  std::lock_guard lock(mu_);
  if (pids_.count(job.id.uuid)) return std::nullopt;
  return Step{JobState::kAborted, "process lost across restart", {}, {}};
}

}  // namespace lgrid::jobs
