// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#include "lgrid/jobs/manager.hpp"

#include <algorithm>
#include <iostream>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "lgrid/pki/digest.hpp"

namespace lgrid::jobs {

namespace fs = std::filesystem;
using nlohmann::json;
using Kind = JobError::Kind;

std::string_view to_string(JobError::Kind k) {
  switch (k) {
    case Kind::kNotAuthorized:
      return "not-authorized";
    case Kind::kInvalid:
      return "invalid-descriptor";
    case Kind::kSandbox:
      return "sandbox-rejected";
    case Kind::kNotFound:
      return "not-found";
    case Kind::kNotOwner:
      return "not-owner";
    case Kind::kWrongState:
      return "wrong-state";
    case Kind::kAlreadyTerminal:
      return "already-terminal";
  }
  return "?";
}

std::vector<std::string> expected_outputs(const JobDescriptor& d) {
  std::vector<std::string> out;
  auto add = [&](const std::string& name) {
    if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
  };
  for (const auto& f : d.string_list("OutputSandbox")) add(f);
  if (auto s = d.string_attr("StdOutput")) add(*s);
  if (auto s = d.string_attr("StdError")) add(*s);
  return out;
}

JobManager::JobManager(ManagerConfig config, std::shared_ptr<Executor> executor)
    : config_(std::move(config)), executor_(std::move(executor)), fs_(config_.state_root, config_.observer) {}

std::shared_ptr<JobManager::Slot> JobManager::find(const JobId& id) const {
  std::lock_guard lock(mu_);
  auto it = jobs_.find(id.uuid);
  if (it == jobs_.end() || it->second->record.id.host != id.host) return nullptr;
  return it->second;
}

std::shared_ptr<JobManager::Slot> JobManager::owned(const JobId& id,
                                                    const pki::DistinguishedName& requester) const {
  auto slot = find(id);
  if (!slot) throw JobError(Kind::kNotFound, "no job " + id.str());
  if (slot->record.owner != pki::derive_user_id(requester)) {
    throw JobError(Kind::kNotOwner, requester.str() + " does not own " + id.str());
  }
  return slot;
}

std::optional<JobId> JobManager::resolve(std::string_view text) const {
  std::string uuid;
  if (is_uuid(text)) {
    uuid = std::string(text);
  } else {
    try {
      auto id = JobId::parse(text);
      if (find(id)) return id;
    } catch (const std::invalid_argument&) {
    }
    return std::nullopt;
  }
  std::lock_guard lock(mu_);
  auto it = jobs_.find(uuid);
  if (it == jobs_.end()) return std::nullopt;
  return it->second->record.id;
}

void JobManager::persist_record(const JobRecord& r) const {
  json j{{"id", r.id.str()},
         {"owner", r.owner.str()},
         {"owner_dn", r.owner_dn.str()},
         {"proxy_fingerprint", r.proxy_fingerprint},
         {"batch", r.batch},
         {"seq", r.seq},
         {"exit_code", r.exit_code ? json(*r.exit_code) : json(nullptr)}};
  fs_.write_atomic(r.owner, r.home / "record.json", j.dump(2) + "\n");
}

std::vector<JobId> JobManager::submit(const JobDescriptor& descriptor,
                                      const pki::DistinguishedName& owner,
                                      const std::vector<SandboxEntry>& input) {
  auto user = pki::derive_user_id(owner);
  std::optional<std::string> fingerprint;
  if (config_.proxy_lookup) fingerprint = config_.proxy_lookup(user);
  if (!fingerprint) throw JobError(Kind::kNotAuthorized, "no valid proxy for " + owner.str());

  std::vector<JobDescriptor> concrete;
  try {
    concrete = expand(descriptor);
  } catch (const JdlError& e) {
    throw JobError(Kind::kInvalid, e.what());
  }

  std::vector<SandboxEntry> files;
  std::set<std::string> seen;
  try {
    for (const auto& e : input) {
      auto path = checked_relative_path(e.path);
      if (!seen.insert(path).second) throw SandboxError(SandboxError::Kind::kCorrupt, "duplicate " + path);
      files.push_back({path, e.bytes});
    }
    for (const auto& job : concrete) {
      for (const auto& name : job.string_list("InputSandbox")) {
        if (!seen.count(checked_relative_path(name))) {
          throw JobError(Kind::kSandbox, "InputSandbox file " + name + " was not uploaded");
        }
      }
    }
  } catch (const SandboxError& e) {
    throw JobError(Kind::kSandbox, e.what());
  }

  auto batch = pki::random_token(8);
  auto now = config_.clock();
  std::vector<JobRecord> created;
  try {
    for (auto& d : concrete) {
      JobRecord r{JobId::generate(config_.host), user, owner, std::move(d)};
      r.home = fs_.home_of(user) / "jobs" / r.id.uuid;
      r.proxy_fingerprint = *fingerprint;
      r.batch = batch;
      r.seq = next_seq_++;

      fs_.create_dirs(user, r.input_dir());
      fs_.create_dirs(user, r.work_dir());
      fs_.create_dirs(user, r.output_dir());
      fs_.write_atomic(user, r.home / "descriptor.jdl", format_jdl(r.descriptor));
      for (const auto& f : files) {
        auto dest = r.input_dir() / f.path;
        fs_.create_dirs(user, dest.parent_path());
        fs_.write_atomic(user, dest, f.bytes);
      }
      persist_record(r);
      HistoryEntry first{JobState::kSubmitted, now, "submitted"};
      // The status line makes the job exist; everything above is scaffolding.
      fs_.append_line(user, r.home / "status.log", format_status_line(first));
      r.history.push_back(first);
      created.push_back(std::move(r));
    }
  } catch (...) {
    for (const auto& r : created) fs_.remove_all(user, r.home);
    throw;
  }

  std::vector<JobId> ids;
  std::lock_guard lock(mu_);
  for (auto& r : created) {
    ids.push_back(r.id);
    jobs_.emplace(ids.back().uuid, std::make_shared<Slot>(std::move(r)));
  }
  return ids;
}

void JobManager::stage_inputs(const JobRecord& r) const {
  for (const auto& rel : fs_.files_under(r.owner, r.input_dir())) {
    auto dest = r.work_dir() / rel;
    fs_.create_dirs(r.owner, dest.parent_path());
    fs_.write_atomic(r.owner, dest, fs_.read(r.owner, r.input_dir() / rel));
  }
  auto exe = r.descriptor.string_attr("Executable");
  if (exe && exe->find('/') == std::string::npos && fs_.is_regular_file(r.owner, r.work_dir() / *exe)) {
    fs_.make_executable(r.owner, r.work_dir() / *exe);
  }
}

void JobManager::harvest_outputs(const JobRecord& r) const {
  for (const auto& name : expected_outputs(r.descriptor)) {
    try {
      auto rel = checked_relative_path(name);
      auto src = r.work_dir() / rel;
      if (!fs_.is_regular_file(r.owner, src)) continue;
      auto dest = r.output_dir() / rel;
      fs_.create_dirs(r.owner, dest.parent_path());
      fs_.write_atomic(r.owner, dest, fs_.read(r.owner, src));
    } catch (const SandboxError&) {
      continue;  // reported as missing at retrieval
    } catch (const HomeViolation&) {
      continue;
    }
  }
}

void JobManager::purge(const JobRecord& r) const {
  fs_.remove_all(r.owner, r.input_dir());
  fs_.remove_all(r.owner, r.work_dir());
  fs_.remove_all(r.owner, r.output_dir());
}

void JobManager::apply(JobRecord& r, Step step) {
  if (!is_legal_transition(r.state, step.next)) {
    throw std::logic_error("illegal transition " + std::string(to_string(r.state)) + " -> " +
                           std::string(to_string(step.next)) + " for " + r.id.str());
  }
  for (const auto& f : step.produced) {
    try {
      auto dest = r.work_dir() / checked_relative_path(f.path);
      fs_.create_dirs(r.owner, dest.parent_path());
      fs_.write_atomic(r.owner, dest, f.bytes);
    } catch (const SandboxError&) {
    }
  }
  if (step.next == JobState::kScheduled) stage_inputs(r);
  if (step.next == JobState::kDoneOk || step.next == JobState::kDoneFailed) harvest_outputs(r);
  if (step.exit_code) {
    r.exit_code = step.exit_code;
    persist_record(r);
  }
  HistoryEntry e{step.next, std::max(config_.clock(), r.history.back().at), std::move(step.reason)};
  fs_.append_line(r.owner, r.home / "status.log", format_status_line(e));
  r.history.push_back(std::move(e));
  r.state = step.next;
}

std::optional<JobState> JobManager::advance(const JobId& id) {
  auto slot = find(id);
  if (!slot) throw JobError(Kind::kNotFound, "no job " + id.str());
  std::lock_guard lock(slot->mu);
  auto& r = slot->record;
  if (is_terminal(r.state)) return std::nullopt;
  auto step = executor_->poll(r, config_.clock());
  if (!step) return std::nullopt;
  apply(r, std::move(*step));
  return r.state;
}

std::size_t JobManager::tick() {
  std::vector<std::shared_ptr<Slot>> slots;
  {
    std::lock_guard lock(mu_);
    for (auto& [_, s] : jobs_) slots.push_back(s);
  }
  std::size_t moved = 0;
  for (auto& s : slots) {
    std::lock_guard lock(s->mu);
    auto& r = s->record;
    if (is_terminal(r.state)) continue;
    auto step = executor_->poll(r, config_.clock());
    if (!step) continue;
    apply(r, std::move(*step));
    ++moved;
  }
  return moved;
}

bool JobManager::settle(std::chrono::milliseconds timeout, std::chrono::milliseconds interval) {
  auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    tick();
    bool pending = false;
    for (const auto& r : snapshot()) pending = pending || !is_terminal(r.state);
    if (!pending) return true;
    if (std::chrono::steady_clock::now() >= deadline) return false;
    std::this_thread::sleep_for(interval);
  }
}

JobRecord JobManager::status(const JobId& id, const pki::DistinguishedName& requester) const {
  auto slot = owned(id, requester);
  std::lock_guard lock(slot->mu);
  return slot->record;
}

std::vector<JobRecord> JobManager::list(const pki::DistinguishedName& owner) const {
  auto user = pki::derive_user_id(owner);
  std::vector<JobRecord> out;
  for (auto& r : snapshot()) {
    if (r.owner == user) out.push_back(std::move(r));
  }
  return out;
}

JobRecord JobManager::cancel(const JobId& id, const pki::DistinguishedName& requester) {
  auto slot = owned(id, requester);
  std::lock_guard lock(slot->mu);
  auto& r = slot->record;
  if (is_terminal(r.state)) {
    throw JobError(Kind::kAlreadyTerminal, id.str() + " is already " + std::string(to_string(r.state)));
  }
  executor_->cancel(r);
  apply(r, Step{JobState::kCancelled, "cancelled by owner", {}, {}});
  return r;
}

std::optional<JobRecord> JobManager::abort(const JobId& id, const std::string& reason) {
  auto slot = find(id);
  if (!slot) return std::nullopt;
  std::lock_guard lock(slot->mu);
  auto& r = slot->record;
  if (is_terminal(r.state)) return std::nullopt;
  executor_->cancel(r);
  apply(r, Step{JobState::kAborted, reason, {}, {}});
  return r;
}

std::string JobManager::fetch_output(const JobId& id, const pki::DistinguishedName& requester) {
  auto slot = owned(id, requester);
  std::lock_guard lock(slot->mu);
  auto& r = slot->record;
  if (r.state != JobState::kDoneOk && r.state != JobState::kDoneFailed) {
    throw JobError(Kind::kWrongState,
                   "output of " + id.str() + " is not available in state " + std::string(to_string(r.state)));
  }

  std::vector<SandboxEntry> entries;
  std::vector<std::string> missing;
  for (const auto& name : expected_outputs(r.descriptor)) {
    try {
      auto rel = checked_relative_path(name);
      auto p = r.output_dir() / rel;
      if (fs_.is_regular_file(r.owner, p)) {
        entries.push_back({rel, fs_.read(r.owner, p)});
        continue;
      }
    } catch (const SandboxError&) {
    } catch (const HomeViolation&) {
    }
    missing.push_back(name);
  }
  if (!missing.empty()) {
    std::string manifest = "The following declared outputs were not produced:\n";
    for (const auto& m : missing) manifest += m + "\n";
    entries.push_back({"MISSING_OUTPUTS.txt", manifest});
  }
  auto archive = pack(entries);

  apply(r, Step{JobState::kCleared, "output retrieved", {}, {}});
  purge(r);
  return archive;
}

std::vector<JobRecord> JobManager::snapshot() const {
  std::vector<std::shared_ptr<Slot>> slots;
  {
    std::lock_guard lock(mu_);
    for (auto& [_, s] : jobs_) slots.push_back(s);
  }
  std::vector<JobRecord> out;
  out.reserve(slots.size());
  for (auto& s : slots) {
    std::lock_guard lock(s->mu);
    out.push_back(s->record);
  }
  std::sort(out.begin(), out.end(), [](const JobRecord& a, const JobRecord& b) { return a.seq < b.seq; });
  return out;
}

std::optional<JobRecord> JobManager::load_job(const pki::UserId& owner, const fs::path& dir) const {
  try {
    if (!fs_.is_regular_file(owner, dir / "record.json") || !fs_.is_regular_file(owner, dir / "status.log")) {
      return std::nullopt;
    }
    auto j = json::parse(fs_.read(owner, dir / "record.json"));
    JobRecord r{JobId::parse(j.at("id").get<std::string>()), pki::UserId(j.at("owner").get<std::string>()),
                pki::parse_dn(j.at("owner_dn").get<std::string>())};
    if (r.owner != owner || pki::derive_user_id(r.owner_dn) != owner || r.id.uuid != dir.filename().string()) {
      std::cerr << "lgrid: skipping " << dir << ": record does not belong here\n";
      return std::nullopt;
    }
    r.descriptor = parse_jdl(fs_.read(owner, dir / "descriptor.jdl"));
    r.history = parse_status_log(fs_.read(owner, dir / "status.log"));
    if (r.history.empty()) return std::nullopt;  // crashed before the first status line
    if (!history_is_legal(r.history)) {
      std::cerr << "lgrid: skipping " << dir << ": history has an illegal transition\n";
      return std::nullopt;
    }
    r.state = r.history.back().state;
    r.home = dir;
    r.proxy_fingerprint = j.value("proxy_fingerprint", "");
    r.batch = j.value("batch", "");
    r.seq = j.value("seq", std::uint64_t{0});
    if (j.contains("exit_code") && j["exit_code"].is_number_integer()) r.exit_code = j["exit_code"].get<int>();
    return r;
  } catch (const std::exception& e) {
    std::cerr << "lgrid: skipping " << dir << ": " << e.what() << "\n";
    return std::nullopt;
  }
}

std::size_t JobManager::reload() {
  std::map<std::string, std::shared_ptr<Slot>> loaded;
  std::uint64_t max_seq = 0;
  for (const auto& owner : fs_.owners()) {
    auto jobs_dir = fs_.home_of(owner) / "jobs";
    if (!fs_.exists(owner, jobs_dir)) continue;
    for (const auto& dir : fs_.list(owner, jobs_dir)) {
      auto r = load_job(owner, dir);
      if (!r) continue;
      if (r->state == JobState::kCleared) purge(*r);
      if (!is_terminal(r->state)) {
        if (auto step = executor_->recover(*r)) apply(*r, std::move(*step));
      }
      max_seq = std::max(max_seq, r->seq);
      auto uuid = r->id.uuid;
      loaded.emplace(uuid, std::make_shared<Slot>(std::move(*r)));
    }
  }
  std::lock_guard lock(mu_);
  jobs_ = std::move(loaded);
  if (max_seq >= next_seq_) next_seq_ = max_seq + 1;
  return jobs_.size();
}

}  // namespace lgrid::jobs
