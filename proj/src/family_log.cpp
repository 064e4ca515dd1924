#include "llt/family_log.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace llt {

using nlohmann::json;

namespace {

void write_durably(const std::string& path, const std::string& data, int flags) {
  int fd = ::open(path.c_str(), flags | O_WRONLY | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) throw Error("cannot open " + path + ": " + std::strerror(errno));
  std::string_view rest = data;
  while (!rest.empty()) {
    ssize_t n = ::write(fd, rest.data(), rest.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      ::close(fd);
      throw Error("write " + path + ": " + std::strerror(errno));
    }
    rest.remove_prefix(static_cast<std::size_t>(n));
  }
  if (::fsync(fd) != 0) {
    ::close(fd);
    throw Error("fsync " + path + ": " + std::strerror(errno));
  }
  ::close(fd);
}

}  // namespace

FamilyLog::FamilyLog(std::string dir, std::shared_ptr<const Dendrogram> tree)
    : dir_(std::move(dir)), tree_(std::move(tree)) {
  std::ifstream in(log_path(), std::ios::binary);
  if (!in) return;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      auto ev = json::parse(line);
      auto kind = ev.at("kind").get<std::string>();
      if (kind == "init") {
        state_ = FamilySet::init(cut(*tree_, ev.at("threshold").get<double>()), tree_);
      } else if (kind == "action") {
        if (!state_) throw Inconsistent("action before init in family log");
        state_->apply(action_from_json(ev.at("action")));
      } else {
        throw ParseError("unknown family log event: " + kind);
      }
    } catch (const json::exception& e) {
      throw ParseError("family log event " + std::to_string(revision_ + 1) + ": " + e.what());
    } catch (const Inconsistent&) {
      throw;
    } catch (const Error& e) {
      throw Inconsistent("family log event " + std::to_string(revision_ + 1) + " does not replay: " + e.what());
    }
    ++revision_;
  }
}

const FamilySet& FamilyLog::state() const {
  if (!state_) throw Inconsistent("families not initialized");
  return *state_;
}

void FamilyLog::check(std::optional<std::uint64_t> expected) const {
  if (expected && *expected != revision_) throw Conflict(*expected, revision_);
}

void FamilyLog::init(double threshold, std::optional<std::uint64_t> expected) {
  check(expected);
  FamilySet next = FamilySet::init(cut(*tree_, threshold), tree_);
  append({{"kind", "init"}, {"threshold", threshold}});
  state_ = std::move(next);
  ++revision_;
  write_snapshot();
}

void FamilyLog::apply(const Action& action, std::optional<std::uint64_t> expected) {
  check(expected);
  if (!state_) throw Inconsistent("families not initialized");
  FamilySet next = *state_;
  next.apply(action);
  append({{"kind", "action"}, {"action", to_json(action)}});
  state_ = std::move(next);
  ++revision_;
  write_snapshot();
}

void FamilyLog::append(const json& event) {
  std::filesystem::create_directories(dir_);
  write_durably(log_path(), event.dump() + "\n", O_APPEND);
}

void FamilyLog::write_snapshot() const {
  json snap = state_->to_json();
  snap["revision"] = revision_;
  std::string tmp = snapshot_path() + ".tmp";
  write_durably(tmp, snap.dump(2) + "\n", O_TRUNC);
  if (std::rename(tmp.c_str(), snapshot_path().c_str()) != 0) {
    throw Error("cannot replace " + snapshot_path() + ": " + std::strerror(errno));
  }
}

std::string FamilyLog::log_path() const { return dir_ + "/families.jsonl"; }
std::string FamilyLog::snapshot_path() const { return dir_ + "/families.snapshot.json"; }

}  // namespace llt
