#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "llt/clustering.hpp"
#include "llt/tokenizer.hpp"

namespace llt {

/// A template position: either a literal token or a placeholder standing
/// for whatever the aligned members disagreed on.
struct Slot {
  bool placeholder = false;
  Bytes literal;

  static Slot lit(Bytes bytes) { return Slot{false, std::move(bytes)}; }
  static Slot hole() { return Slot{true, {}}; }

  bool operator==(const Slot&) const = default;
};

struct Template {
  std::vector<Slot> slots;
  NodeId origin = 0;

  static Template from_tokens(const TokenSeq& tokens, NodeId origin = 0);
  std::size_t literal_count() const;
  std::vector<Bytes> literals() const;

  /// Compares slots only; the origin is bookkeeping.
  bool operator==(const Template& other) const { return slots == other.slots; }
};

struct Scoring {
  double match = 1.0;
  double mismatch = -1.0;
  double gap = -1.0;

  /// Throws std::invalid_argument unless match > 0, mismatch <= 0, gap <= 0.
  void validate() const;
};

/// One alignment column. At least one side is set; a missing side is a gap.
struct Column {
  std::optional<std::size_t> a;
  std::optional<std::size_t> b;
};

struct Alignment {
  double score = 0.0;
  std::size_t matches = 0;
  // Optimal local window, half-open, in slot indices of each input.
  std::size_t a_begin = 0, a_end = 0, b_begin = 0, b_end = 0;
  /// Spans both inputs end to end: unaligned head, the local window, then the
  /// unaligned tail. Within the head and tail, a-side columns precede
  /// b-side ones.
  std::vector<Column> columns;
};

/// Smith-Waterman over template slots. A placeholder on either side never
/// matches; pairing it scores as a gap. Ties prefer more matched tokens,
/// then the standard diagonal > up > left backtrack order.
Alignment local_alignment(const std::vector<Slot>& a, const std::vector<Slot>& b, const Scoring& s = {});

/// Template shared by a and b: identical aligned tokens stay literal,
/// everything else (including outside the local window) collapses into
/// single placeholders.
Template align(const Template& a, const Template& b, const Scoring& s = {});

/// Best local score by enumerating every monotone alignment path. Inputs are
/// limited to 6 slots each; throws OracleTooLarge beyond that.
double exhaustive_align_oracle(const std::vector<Slot>& a, const std::vector<Slot>& b, const Scoring& s = {});

/// Templates for every tree node, indexed by node id. Leaves hold their own
/// token sequence; internal nodes align their children bottom-up.
std::vector<Template> annotate_tree(const Dendrogram& tree, const std::vector<TokenSeq>& corpus_tokens,
                                    const Scoring& s = {});

/// Do the literal slots of `t`, in order, form a subsequence of `tokens`?
bool literals_are_subsequence(const Template& t, const TokenSeq& tokens);

/// Literals escaped, placeholders as «*».
std::string render(const Template& t);

/// Slots as a JSON array: escaped strings for literals, null for placeholders.
nlohmann::json slots_to_json(const Template& t);
Template template_from_json(const nlohmann::json& slots, NodeId origin);

nlohmann::json templates_to_json(const std::vector<Template>& templates, const Dendrogram& tree);
std::vector<Template> templates_from_json(const nlohmann::json& j);

}  // namespace llt
