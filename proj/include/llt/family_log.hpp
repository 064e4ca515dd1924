#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "json.hpp"

#include "llt/error.hpp"
#include "llt/families.hpp"

namespace llt {

/// A mutation was submitted against a revision other than the current one.
class Conflict : public Error {
 public:
  Conflict(std::uint64_t expected, std::uint64_t current)
      : Error("stale revision " + std::to_string(expected) + ", current is " + std::to_string(current)),
        current_(current) {}
  std::uint64_t current() const { return current_; }

 private:
  std::uint64_t current_;
};

/// Durable event log of refinement decisions for one session directory
/// (families.jsonl). Each line is an event; the revision is the number of
/// events. An "init" event restarts the family set from a fresh cut, later
/// "action" events apply on top. Every event is fsync'd before the call
/// returns, and families.snapshot.json is then replaced atomically.
class FamilyLog {
 public:
  /// Replays an existing log, or starts empty (revision 0). Throws ParseError
  /// on a malformed log and Inconsistent when it does not replay.
  FamilyLog(std::string dir, std::shared_ptr<const Dendrogram> tree);

  std::uint64_t revision() const { return revision_; }
  bool initialized() const { return state_.has_value(); }
  /// Throws Inconsistent before the first init.
  const FamilySet& state() const;

  /// Both throw Conflict when `expected` is set and differs from revision();
  /// apply also throws whatever FamilySet::apply throws. The log is unchanged
  /// on any error.
  void init(double threshold, std::optional<std::uint64_t> expected = std::nullopt);
  void apply(const Action& action, std::optional<std::uint64_t> expected = std::nullopt);

  std::string log_path() const;
  std::string snapshot_path() const;

 private:
  void check(std::optional<std::uint64_t> expected) const;
  void append(const nlohmann::json& event);
  void write_snapshot() const;

  std::string dir_;
  std::shared_ptr<const Dendrogram> tree_;
  std::optional<FamilySet> state_;
  std::uint64_t revision_ = 0;
};

}  // namespace llt
