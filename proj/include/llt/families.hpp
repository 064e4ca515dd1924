#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "llt/alignment.hpp"
#include "llt/clustering.hpp"

namespace llt {

using FamilyId = std::uint64_t;

enum class ChangeKind { Added, Removed, Modified };

std::string_view to_string(ChangeKind k);
ChangeKind change_kind_from_string(std::string_view s);
/// "+", "-" or "±".
std::string_view change_symbol(ChangeKind k);

struct LineageChange {
  ChangeKind kind = ChangeKind::Modified;
  std::string label;

  bool operator==(const LineageChange&) const = default;
};

/// Analyst annotation between two related families.
struct LineageEdge {
  FamilyId from = 0;
  FamilyId to = 0;
  std::vector<LineageChange> changes;

  bool operator==(const LineageEdge&) const = default;
};

struct Family {
  FamilyId id = 0;
  std::string name;  // empty until the analyst names it
  std::vector<std::size_t> members;  // leaf indices, ascending
  NodeId anchor = 0;  // lowest common ancestor of the members
  std::string notes;
  bool kept = false;

  bool operator==(const Family&) const = default;
};

enum class ActionKind { Keep, Merge, Split, Rename, Note, Lineage };

std::string_view to_string(ActionKind k);

struct Action {
  ActionKind kind = ActionKind::Keep;
  std::vector<FamilyId> operands;
  std::string text;  // new name for Rename, note text for Note
  std::optional<LineageEdge> edge;  // Lineage only
  std::string actor;
  Timestamp at{};

  bool operator==(const Action&) const = default;
};

nlohmann::json to_json(const Action& a);
Action action_from_json(const nlohmann::json& j);

/// The refinement checklist shown next to every refinement action.
/// Never applied automatically.
const std::vector<std::string>& refinement_criteria();

/// Analyst-refined partition of the tree. Families always partition the full
/// leaf set, and replaying `history()` over the initial cut reproduces the
/// current state. Mutations go through apply(); the free functions below
/// return modified copies.
class FamilySet {
 public:
  /// One unnamed family per partition group. Throws Inconsistent when the
  /// partition does not describe subtrees of `tree`.
  static FamilySet init(const Partition& p, std::shared_ptr<const Dendrogram> tree);
  /// init(cut(tree, threshold)) followed by every action in order.
  static FamilySet replay(std::shared_ptr<const Dendrogram> tree, double threshold, const std::vector<Action>& history);

  const std::vector<Family>& families() const { return families_; }
  const std::vector<Action>& history() const { return history_; }
  const std::vector<LineageEdge>& lineage_edges() const { return edges_; }
  double threshold() const { return threshold_; }
  const Dendrogram& tree() const { return *tree_; }
  std::shared_ptr<const Dendrogram> tree_ptr() const { return tree_; }

  const Family& get(FamilyId id) const;
  bool has(FamilyId id) const;
  FamilyId family_of_leaf(std::size_t leaf) const;

  /// Validates and applies one action, then records it. Throws NotFound,
  /// CannotSplit or std::invalid_argument; the set is unchanged on error.
  void apply(const Action& action);

  /// Families plus lineage edges, without history. Used for snapshots.
  nlohmann::json to_json() const;
  bool same_state(const FamilySet& other) const;

 private:
  FamilySet() = default;
  void sort_families();
  Family& find(FamilyId id);
  NodeId anchor_of(const std::vector<std::size_t>& members) const;

  std::shared_ptr<const Dendrogram> tree_;
  double threshold_ = 0.0;
  std::vector<Family> families_;
  std::vector<Action> history_;
  std::vector<LineageEdge> edges_;
  FamilyId next_id_ = 1;
};

struct ActionMeta {
  std::string actor;
  Timestamp at{};
};

FamilySet init_families(const Partition& p, std::shared_ptr<const Dendrogram> tree);
FamilySet merge_families(FamilySet fs, FamilyId a, FamilyId b, const ActionMeta& meta = {});
FamilySet split_family(FamilySet fs, FamilyId a, const ActionMeta& meta = {});
FamilySet rename_family(FamilySet fs, FamilyId a, std::string name, const ActionMeta& meta = {});
FamilySet keep_family(FamilySet fs, FamilyId a, const ActionMeta& meta = {});
FamilySet annotate_lineage(FamilySet fs, LineageEdge edge, const ActionMeta& meta = {});

/// The id of the newest family, i.e. the merge result or the second half of a split.
FamilyId newest_family(const FamilySet& fs);

struct TemplateChange {
  ChangeKind kind = ChangeKind::Modified;
  std::vector<Slot> from;  // segment of a
  std::vector<Slot> to;    // segment of b

  std::string label() const;
  bool operator==(const TemplateChange&) const = default;
};

struct DiffOptions {
  Scoring scoring{};
  /// Self-identification tokens whose variation is ignored (empty by default).
  std::set<Bytes> ignored_tokens;
};

/// Differences from a to b after aligning them: runs with literals only in b
/// are Added, only in a Removed, and runs with something on both sides
/// Modified. Equal runs are omitted. Swapping the arguments swaps Added and
/// Removed.
std::vector<TemplateChange> diff_templates(const Template& a, const Template& b, const DiffOptions& opts = {});

std::vector<LineageChange> to_lineage_changes(const std::vector<TemplateChange>& diff);

/// Highest-information alphanumeric literal of the anchor template
/// (fewest corpus logs containing it; then longer; then lexicographic).
/// Falls back to "family-<id>".
std::string suggest_family_name(const Family& family, const std::vector<Template>& templates,
                                const std::vector<TokenSeq>& corpus_tokens);

enum class LineageFormat { Dot, Json, Newick };

/// Throws Unsupported for anything but dot, json or newick.
LineageFormat lineage_format_from_string(std::string_view s);

/// Family-level dendrogram: families are terminals, internal nodes sit at
/// the heights where the original tree first joins them, and lineage edges
/// carry their +/-/± labels. Output is deterministic for fixed inputs.
/// `display_names` overrides empty family names (keyed by family position).
std::string export_lineage(const FamilySet& fs, const std::vector<Template>& templates, LineageFormat format,
                           const std::vector<std::string>* display_names = nullptr);

}  // namespace llt
