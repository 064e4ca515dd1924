#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace llt {

struct NewickNode {
  std::string name;
  std::optional<double> length;
  std::vector<NewickNode> children;

  bool is_leaf() const { return children.empty(); }
  std::size_t leaf_count() const;
  /// Sorted leaf names below (or at) this node.
  std::vector<std::string> leaf_names() const;
};

/// Parses a single Newick tree terminated by ';'. Quoted labels ('..' with
/// '' as an escaped quote) and [comments] are supported. Throws ParseError.
NewickNode parse_newick(std::string_view text);

/// Quotes a label only when it holds Newick metacharacters or whitespace.
std::string quote_newick_label(std::string_view label);
std::string format_newick_length(double length);

}  // namespace llt
