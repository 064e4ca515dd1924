#include "llt/families.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "llt/error.hpp"
#include "llt/newick.hpp"

namespace llt {

using nlohmann::json;

std::string_view to_string(ChangeKind k) {
  switch (k) {
    case ChangeKind::Added:
      return "added";
    case ChangeKind::Removed:
      return "removed";
    case ChangeKind::Modified:
      return "modified";
  }
  return "?";
}

ChangeKind change_kind_from_string(std::string_view s) {
  if (s == "added" || s == "+") return ChangeKind::Added;
  if (s == "removed" || s == "-") return ChangeKind::Removed;
  if (s == "modified" || s == "±" || s == "+-") return ChangeKind::Modified;
  throw ParseError("unknown change kind: " + std::string(s));
}

std::string_view change_symbol(ChangeKind k) {
  switch (k) {
    case ChangeKind::Added:
      return "+";
    case ChangeKind::Removed:
      return "-";
    case ChangeKind::Modified:
      return "±";
  }
  return "?";
}

std::string_view to_string(ActionKind k) {
  switch (k) {
    case ActionKind::Keep:
      return "keep";
    case ActionKind::Merge:
      return "merge";
    case ActionKind::Split:
      return "split";
    case ActionKind::Rename:
      return "rename";
    case ActionKind::Note:
      return "note";
    case ActionKind::Lineage:
      return "lineage";
  }
  return "?";
}

namespace {

ActionKind action_kind_from_string(std::string_view s) {
  for (auto k : {ActionKind::Keep, ActionKind::Merge, ActionKind::Split, ActionKind::Rename, ActionKind::Note,
                 ActionKind::Lineage}) {
    if (to_string(k) == s) return k;
  }
  throw ParseError("unknown action kind: " + std::string(s));
}

json edge_to_json(const LineageEdge& e) {
  json changes = json::array();
  for (const auto& c : e.changes) changes.push_back({{"kind", to_string(c.kind)}, {"label", c.label}});
  return {{"from", e.from}, {"to", e.to}, {"changes", std::move(changes)}};
}

LineageEdge edge_from_json(const json& j) {
  LineageEdge e;
  e.from = j.at("from").get<FamilyId>();
  e.to = j.at("to").get<FamilyId>();
  for (const auto& c : j.at("changes")) {
    e.changes.push_back({change_kind_from_string(c.at("kind").get<std::string>()), c.at("label").get<std::string>()});
  }
  return e;
}

}  // namespace

json to_json(const Action& a) {
  json j = {{"kind", to_string(a.kind)}, {"operands", a.operands}, {"actor", a.actor}, {"at", format_rfc3339(a.at)}};
  if (!a.text.empty()) j["text"] = a.text;
  if (a.edge) j["edge"] = edge_to_json(*a.edge);
  return j;
}

Action action_from_json(const json& j) {
  try {
    Action a;
    a.kind = action_kind_from_string(j.at("kind").get<std::string>());
    a.operands = j.value("operands", std::vector<FamilyId>{});
    a.text = j.value("text", std::string{});
    if (j.contains("edge")) a.edge = edge_from_json(j["edge"]);
    a.actor = j.value("actor", std::string{});
    a.at = parse_rfc3339(j.value("at", std::string("1970-01-01T00:00:00Z")));
    return a;
  } catch (const json::exception& e) {
    throw ParseError(std::string("refinement action: ") + e.what());
  }
}

const std::vector<std::string>& refinement_criteria() {
  static const std::vector<std::string> criteria = {
      "Shared commands count, but so do their arguments and the order they run in.",
      "For compound statements, compare the statement structure before the individual commands inside it.",
      "Tokens that only name the bot or campaign may vary inside one family, unless they change which commands or "
      "arguments are used.",
  };
  return criteria;
}

FamilySet FamilySet::init(const Partition& p, std::shared_ptr<const Dendrogram> tree) {
  if (!tree) throw std::invalid_argument("init_families needs a tree");
  FamilySet fs;
  fs.tree_ = std::move(tree);
  fs.threshold_ = p.threshold;
  std::vector<bool> covered(fs.tree_->leaf_count(), false);
  for (const auto& g : p.groups) {
    if (!fs.tree_->contains(g.anchor)) throw Inconsistent("partition group anchored outside the tree");
    if (fs.tree_->members(g.anchor) != g.members) throw Inconsistent("partition group is not its anchor's subtree");
    for (auto leaf : g.members) {
      if (covered[leaf]) throw Inconsistent("leaf appears in two partition groups");
      covered[leaf] = true;
    }
    Family f;
    f.id = fs.next_id_++;
    f.members = g.members;
    f.anchor = g.anchor;
    fs.families_.push_back(std::move(f));
  }
  if (std::find(covered.begin(), covered.end(), false) != covered.end()) {
    throw Inconsistent("partition does not cover every leaf");
  }
  fs.sort_families();
  return fs;
}

FamilySet FamilySet::replay(std::shared_ptr<const Dendrogram> tree, double threshold, const std::vector<Action>& history) {
  const Dendrogram& t = *tree;
  FamilySet fs = init(cut(t, threshold), std::move(tree));
  for (const auto& a : history) fs.apply(a);
  return fs;
}

const Family& FamilySet::get(FamilyId id) const {
  for (const auto& f : families_) {
    if (f.id == id) return f;
  }
  throw NotFound("no family with id " + std::to_string(id));
}

Family& FamilySet::find(FamilyId id) { return const_cast<Family&>(static_cast<const FamilySet&>(*this).get(id)); }

bool FamilySet::has(FamilyId id) const {
  return std::any_of(families_.begin(), families_.end(), [&](const Family& f) { return f.id == id; });
}

FamilyId FamilySet::family_of_leaf(std::size_t leaf) const {
  for (const auto& f : families_) {
    if (std::binary_search(f.members.begin(), f.members.end(), leaf)) return f.id;
  }
  throw NotFound("leaf " + std::to_string(leaf) + " belongs to no family");
}

void FamilySet::sort_families() {
  std::sort(families_.begin(), families_.end(),
            [](const Family& a, const Family& b) { return a.members.front() < b.members.front(); });
}

NodeId FamilySet::anchor_of(const std::vector<std::size_t>& members) const {
  NodeId a = members.front();
  for (auto leaf : members) a = tree_->lowest_common_ancestor(a, leaf);
  return a;
}

void FamilySet::apply(const Action& action) {
  auto need = [&](std::size_t n) {
    if (action.operands.size() != n) {
      throw std::invalid_argument(std::string(to_string(action.kind)) + " takes " + std::to_string(n) + " operand(s)");
    }
  };
  switch (action.kind) {
    case ActionKind::Keep: {
      need(1);
      find(action.operands[0]).kept = true;
      break;
    }
    case ActionKind::Rename: {
      need(1);
      find(action.operands[0]).name = action.text;
      break;
    }
    case ActionKind::Note: {
      need(1);
      find(action.operands[0]).notes = action.text;
      break;
    }
    case ActionKind::Merge: {
      need(2);
      FamilyId a = action.operands[0];
      FamilyId b = action.operands[1];
      if (a == b) throw std::invalid_argument("cannot merge a family with itself");
      const Family& fa = get(a);
      const Family& fb = get(b);
      Family merged;
      merged.id = next_id_;
      std::merge(fa.members.begin(), fa.members.end(), fb.members.begin(), fb.members.end(),
                 std::back_inserter(merged.members));
      merged.anchor = tree_->lowest_common_ancestor(fa.anchor, fb.anchor);
      merged.name = fa.name.empty() ? fb.name : fa.name;
      std::erase_if(families_, [&](const Family& f) { return f.id == a || f.id == b; });
      families_.push_back(std::move(merged));
      // Annotations follow the merged family; ones now internal to it go away.
      for (auto& e : edges_) {
        if (e.from == a || e.from == b) e.from = next_id_;
        if (e.to == a || e.to == b) e.to = next_id_;
      }
      std::erase_if(edges_, [](const LineageEdge& e) { return e.from == e.to; });
      ++next_id_;
      sort_families();
      break;
    }
    case ActionKind::Split: {
      need(1);
      FamilyId a = action.operands[0];
      const Family& fa = get(a);
      if (tree_->is_leaf(fa.anchor)) throw CannotSplit("family " + std::to_string(a) + " is anchored at a leaf");
      const Merge& m = tree_->merge_of(fa.anchor);
      Family left, right;
      for (auto leaf : fa.members) {
        (tree_->descends_from(leaf, m.left) ? left : right).members.push_back(leaf);
      }
      // The anchor is the LCA of the members, so both sides are non-empty.
      left.anchor = anchor_of(left.members);
      right.anchor = anchor_of(right.members);
      left.id = next_id_;
      right.id = next_id_ + 1;
      std::erase_if(families_, [&](const Family& f) { return f.id == a; });
      std::erase_if(edges_, [&](const LineageEdge& e) { return e.from == a || e.to == a; });
      families_.push_back(std::move(left));
      families_.push_back(std::move(right));
      next_id_ += 2;
      sort_families();
      break;
    }
    case ActionKind::Lineage: {
      if (!action.edge) throw std::invalid_argument("lineage action without an edge");
      const auto& e = *action.edge;
      get(e.from);
      get(e.to);
      if (e.from == e.to) throw std::invalid_argument("lineage edge must join two different families");
      auto it = std::find_if(edges_.begin(), edges_.end(),
                             [&](const LineageEdge& x) { return x.from == e.from && x.to == e.to; });
      if (it != edges_.end()) {
        it->changes = e.changes;
      } else {
        edges_.push_back(e);
      }
      break;
    }
  }
  history_.push_back(action);
}

json FamilySet::to_json() const {
  json fams = json::array();
  for (const auto& f : families_) {
    json ids = json::array();
    for (auto leaf : f.members) ids.push_back(tree_->leaves()[leaf]);
    fams.push_back({{"id", f.id},
                    {"name", f.name},
                    {"members", f.members},
                    {"member_ids", ids},
                    {"anchor", f.anchor},
                    {"notes", f.notes},
                    {"kept", f.kept}});
  }
  json edges = json::array();
  for (const auto& e : edges_) edges.push_back(edge_to_json(e));
  return {{"format", "llt-families"},
          {"version", 1},
          {"threshold", threshold_},
          {"families", std::move(fams)},
          {"lineage_edges", std::move(edges)},
          {"history_length", history_.size()}};
}

bool FamilySet::same_state(const FamilySet& other) const {
  return families_ == other.families_ && edges_ == other.edges_ && next_id_ == other.next_id_;
}

FamilySet init_families(const Partition& p, std::shared_ptr<const Dendrogram> tree) {
  return FamilySet::init(p, std::move(tree));
}

namespace {

FamilySet applied(FamilySet fs, Action a, const ActionMeta& meta) {
  a.actor = meta.actor;
  a.at = meta.at;
  fs.apply(a);
  return fs;
}

}  // namespace

FamilySet merge_families(FamilySet fs, FamilyId a, FamilyId b, const ActionMeta& meta) {
  return applied(std::move(fs), Action{ActionKind::Merge, {a, b}, {}, {}, {}, {}}, meta);
}

FamilySet split_family(FamilySet fs, FamilyId a, const ActionMeta& meta) {
  return applied(std::move(fs), Action{ActionKind::Split, {a}, {}, {}, {}, {}}, meta);
}

FamilySet rename_family(FamilySet fs, FamilyId a, std::string name, const ActionMeta& meta) {
  return applied(std::move(fs), Action{ActionKind::Rename, {a}, std::move(name), {}, {}, {}}, meta);
}

FamilySet keep_family(FamilySet fs, FamilyId a, const ActionMeta& meta) {
  return applied(std::move(fs), Action{ActionKind::Keep, {a}, {}, {}, {}, {}}, meta);
}

FamilySet annotate_lineage(FamilySet fs, LineageEdge edge, const ActionMeta& meta) {
  return applied(std::move(fs), Action{ActionKind::Lineage, {}, {}, std::move(edge), {}, {}}, meta);
}

FamilyId newest_family(const FamilySet& fs) {
  FamilyId best = 0;
  for (const auto& f : fs.families()) best = std::max(best, f.id);
  return best;
}

std::string TemplateChange::label() const {
  auto r = [](const std::vector<Slot>& s) { return render(Template{s, 0}); };
  switch (kind) {
    case ChangeKind::Added:
      return r(to);
    case ChangeKind::Removed:
      return r(from);
    case ChangeKind::Modified:
      return r(from) + " ↔ " + r(to);
  }
  return {};
}

namespace {

bool slots_less(const std::vector<Slot>& x, const std::vector<Slot>& y) {
  return std::lexicographical_compare(x.begin(), x.end(), y.begin(), y.end(), [](const Slot& p, const Slot& q) {
    if (p.placeholder != q.placeholder) return p.placeholder < q.placeholder;
    return p.literal < q.literal;
  });
}

}  // namespace

std::vector<TemplateChange> diff_templates(const Template& a, const Template& b, const DiffOptions& opts) {
  // Align in a canonical argument order so diff(a,b) and diff(b,a) share one
  // alignment and differ only by orientation.
  const bool swapped = slots_less(b.slots, a.slots);
  const Template& first = swapped ? b : a;
  const Template& second = swapped ? a : b;
  Alignment al = local_alignment(first.slots, second.slots, opts.scoring);

  std::vector<TemplateChange> out;
  std::vector<Slot> from, to;
  auto flush = [&]() {
    auto has_literal = [&](const std::vector<Slot>& v) {
      return std::any_of(v.begin(), v.end(), [&](const Slot& s) {
        return !s.placeholder && !opts.ignored_tokens.contains(s.literal);
      });
    };
    bool lit_a = has_literal(from);
    bool lit_b = has_literal(to);
    if (lit_a || lit_b) {
      TemplateChange c;
      if (from.empty()) {
        c.kind = ChangeKind::Added;
      } else if (to.empty()) {
        c.kind = ChangeKind::Removed;
      } else {
        c.kind = ChangeKind::Modified;
      }
      c.from = std::move(from);
      c.to = std::move(to);
      out.push_back(std::move(c));
    }
    from.clear();
    to.clear();
  };
  for (const auto& col : al.columns) {
    std::optional<std::size_t> ia = swapped ? col.b : col.a;
    std::optional<std::size_t> ib = swapped ? col.a : col.b;
    if (ia && ib && !a.slots[*ia].placeholder && !b.slots[*ib].placeholder &&
        a.slots[*ia].literal == b.slots[*ib].literal) {
      flush();
      continue;
    }
    if (ia) from.push_back(a.slots[*ia]);
    if (ib) to.push_back(b.slots[*ib]);
  }
  flush();
  return out;
}

std::vector<LineageChange> to_lineage_changes(const std::vector<TemplateChange>& diff) {
  std::vector<LineageChange> out;
  out.reserve(diff.size());
  for (const auto& d : diff) out.push_back({d.kind, d.label()});
  return out;
}

std::string suggest_family_name(const Family& family, const std::vector<Template>& templates,
                                const std::vector<TokenSeq>& corpus_tokens) {
  std::string fallback = "family-" + std::to_string(family.id);
  if (family.anchor >= templates.size()) return fallback;
  std::unordered_map<std::string, std::size_t> df;
  for (const auto& seq : corpus_tokens) {
    std::unordered_set<std::string_view> seen;
    for (const auto& t : seq) {
      if (t.cls == ByteClass::Alphanumeric && seen.insert(t.bytes).second) ++df[t.bytes];
    }
  }
  const std::string* best = nullptr;
  std::size_t best_df = 0;
  for (const auto& slot : templates[family.anchor].slots) {
    if (slot.placeholder || slot.literal.size() < 3) continue;
    if (classify_byte(static_cast<std::uint8_t>(slot.literal[0])) != ByteClass::Alphanumeric) continue;
    auto it = df.find(slot.literal);
    std::size_t d = it == df.end() ? 0 : it->second;
    bool wins = !best || d < best_df || (d == best_df && slot.literal.size() > best->size()) ||
                (d == best_df && slot.literal.size() == best->size() && slot.literal < *best);
    if (wins) {
      best = &slot.literal;
      best_df = d;
    }
  }
  return best ? *best : fallback;
}

LineageFormat lineage_format_from_string(std::string_view s) {
  if (s == "dot") return LineageFormat::Dot;
  if (s == "json") return LineageFormat::Json;
  if (s == "newick") return LineageFormat::Newick;
  throw Unsupported("unsupported export format: " + std::string(s));
}

namespace {

// Family-level tree. Terminals are indices into fs.families(); joins are
// created at the first original merge that brings two families' components
// together.
struct LineageTree {
  struct Node {
    bool terminal = false;
    std::size_t family = 0;     // terminal only
    double height = 0.0;        // join height, or the family anchor height
    std::size_t left = 0, right = 0;  // joins only
  };
  std::vector<Node> nodes;
  std::size_t root = 0;
};

LineageTree build_lineage_tree(const FamilySet& fs) {
  const Dendrogram& tree = fs.tree();
  const auto& fams = fs.families();
  LineageTree lt;
  std::vector<std::size_t> leaf_family(tree.leaf_count());
  for (std::size_t f = 0; f < fams.size(); ++f) {
    for (auto leaf : fams[f].members) leaf_family[leaf] = f;
    lt.nodes.push_back({true, f, tree.height(fams[f].anchor), 0, 0});
  }
  std::vector<std::size_t> dsu(fams.size());
  std::iota(dsu.begin(), dsu.end(), 0);
  std::vector<std::size_t> comp_node(fams.size());
  std::iota(comp_node.begin(), comp_node.end(), 0);
  auto root_of = [&](std::size_t x) {
    while (dsu[x] != x) x = dsu[x] = dsu[dsu[x]];
    return x;
  };
  const std::size_t n = tree.leaf_count();
  // Any leaf of a node's subtree represents it: every family inside a
  // subtree is already in one component once that subtree is complete.
  std::vector<std::size_t> rep(tree.node_count());
  std::iota(rep.begin(), rep.begin() + static_cast<std::ptrdiff_t>(n), 0);
  for (std::size_t k = 0; k < tree.merges().size(); ++k) {
    const auto& m = tree.merges()[k];
    rep[n + k] = rep[m.left];
    std::size_t cl = root_of(leaf_family[rep[m.left]]);
    std::size_t cr = root_of(leaf_family[rep[m.right]]);
    if (cl == cr) continue;
    LineageTree::Node join;
    join.height = m.height;
    join.left = comp_node[cl];
    join.right = comp_node[cr];
    lt.nodes.push_back(join);
    dsu[cr] = cl;
    comp_node[cl] = lt.nodes.size() - 1;
  }
  lt.root = fams.empty() ? 0 : comp_node[root_of(0)];
  return lt;
}

std::vector<std::string> terminal_labels(const FamilySet& fs, const std::vector<std::string>* display_names) {
  const auto& fams = fs.families();
  std::vector<std::string> labels;
  std::map<std::string, int> uses;
  for (std::size_t f = 0; f < fams.size(); ++f) {
    std::string name = fams[f].name;
    if (name.empty() && display_names && f < display_names->size()) name = (*display_names)[f];
    if (name.empty()) name = "F" + std::to_string(fams[f].id);
    labels.push_back(name);
    ++uses[name];
  }
  for (std::size_t f = 0; f < fams.size(); ++f) {
    if (uses[labels[f]] > 1) labels[f] += "#" + std::to_string(fams[f].id);
  }
  return labels;
}

std::string fmt_height(double h) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", h);
  return buf;
}

std::string dot_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

std::string html_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '&':
        out += "&amp;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

std::string_view change_color(ChangeKind k) {
  switch (k) {
    case ChangeKind::Added:
      return "green";
    case ChangeKind::Removed:
      return "red";
    case ChangeKind::Modified:
      return "blue";
  }
  return "black";
}

std::string export_dot(const FamilySet& fs, const LineageTree& lt, const std::vector<std::string>& labels) {
  const auto& fams = fs.families();
  std::ostringstream out;
  out << "digraph lineage {\n  rankdir=LR;\n  node [fontname=\"Helvetica\"];\n";
  for (std::size_t i = 0; i < lt.nodes.size(); ++i) {
    const auto& node = lt.nodes[i];
    if (node.terminal) {
      const auto& f = fams[node.family];
      out << "  f" << f.id << " [shape=box, label=\"" << dot_escape(labels[node.family]) << " ("
          << f.members.size() << ")\"];\n";
    } else {
      out << "  j" << i << " [shape=point, xlabel=\"" << fmt_height(node.height) << "\"];\n";
    }
  }
  auto name = [&](std::size_t i) {
    const auto& node = lt.nodes[i];
    return node.terminal ? "f" + std::to_string(fams[node.family].id) : "j" + std::to_string(i);
  };
  for (std::size_t i = 0; i < lt.nodes.size(); ++i) {
    const auto& node = lt.nodes[i];
    if (node.terminal) continue;
    out << "  " << name(i) << " -> " << name(node.left) << " [arrowhead=none];\n";
    out << "  " << name(i) << " -> " << name(node.right) << " [arrowhead=none];\n";
  }
  for (const auto& e : fs.lineage_edges()) {
    out << "  f" << e.from << " -> f" << e.to << " [style=dashed, constraint=false";
    if (!e.changes.empty()) {
      out << ", label=<";
      for (std::size_t c = 0; c < e.changes.size(); ++c) {
        if (c > 0) out << "<br/>";
        out << "<font color=\"" << change_color(e.changes[c].kind) << "\">" << change_symbol(e.changes[c].kind) << ' '
            << html_escape(e.changes[c].label) << "</font>";
      }
      out << ">";
    }
    out << "];\n";
  }
  out << "}\n";
  return out.str();
}

std::string export_newick(const FamilySet& fs, const LineageTree& lt, const std::vector<std::string>& labels) {
  if (lt.nodes.empty()) return ";";
  (void)fs;
  std::string out;
  struct Frame {
    std::size_t node;
    int stage;
  };
  std::vector<std::size_t> parent(lt.nodes.size(), lt.root);
  for (std::size_t i = 0; i < lt.nodes.size(); ++i) {
    if (!lt.nodes[i].terminal) parent[lt.nodes[i].left] = parent[lt.nodes[i].right] = i;
  }
  auto branch = [&](std::size_t i) {
    if (i == lt.root) return;
    out += ':';
    out += format_newick_length(std::max(0.0, lt.nodes[parent[i]].height - lt.nodes[i].height));
  };
  std::vector<Frame> stack{{lt.root, 0}};
  while (!stack.empty()) {
    auto& f = stack.back();
    const auto& node = lt.nodes[f.node];
    if (node.terminal) {
      out += quote_newick_label(labels[node.family]);
      std::size_t i = f.node;
      stack.pop_back();
      branch(i);
      continue;
    }
    if (f.stage == 0) {
      out += '(';
      f.stage = 1;
      stack.push_back({node.left, 0});
    } else if (f.stage == 1) {
      out += ',';
      f.stage = 2;
      stack.push_back({node.right, 0});
    } else {
      out += ')';
      std::size_t i = f.node;
      stack.pop_back();
      branch(i);
    }
  }
  out += ';';
  return out;
}

std::string export_json(const FamilySet& fs, const LineageTree& lt, const std::vector<std::string>& labels,
                        const std::vector<Template>& templates) {
  const auto& fams = fs.families();
  json families = json::array();
  for (std::size_t f = 0; f < fams.size(); ++f) {
    json entry = {{"id", fams[f].id},
                  {"name", fams[f].name},
                  {"label", labels[f]},
                  {"size", fams[f].members.size()},
                  {"anchor", fams[f].anchor},
                  {"anchor_height", fs.tree().height(fams[f].anchor)},
                  {"kept", fams[f].kept},
                  {"notes", fams[f].notes}};
    if (fams[f].anchor < templates.size()) entry["template"] = render(templates[fams[f].anchor]);
    families.push_back(std::move(entry));
  }
  json nodes = json::array();
  for (std::size_t i = 0; i < lt.nodes.size(); ++i) {
    const auto& node = lt.nodes[i];
    if (node.terminal) {
      nodes.push_back({{"index", i}, {"family", fams[node.family].id}, {"height", node.height}});
    } else {
      nodes.push_back({{"index", i}, {"height", node.height}, {"children", {node.left, node.right}}});
    }
  }
  json edges = json::array();
  for (const auto& e : fs.lineage_edges()) {
    json changes = json::array();
    for (const auto& c : e.changes) {
      changes.push_back({{"kind", to_string(c.kind)}, {"symbol", change_symbol(c.kind)}, {"label", c.label}});
    }
    edges.push_back({{"from", e.from}, {"to", e.to}, {"changes", std::move(changes)}});
  }
  json j = {{"format", "llt-lineage"},
            {"version", 1},
            {"families", std::move(families)},
            {"nodes", std::move(nodes)},
            {"root", lt.root},
            {"lineage_edges", std::move(edges)}};
  return j.dump(2) + "\n";
}

}  // namespace

std::string export_lineage(const FamilySet& fs, const std::vector<Template>& templates, LineageFormat format,
                           const std::vector<std::string>* display_names) {
  LineageTree lt = build_lineage_tree(fs);
  auto labels = terminal_labels(fs, display_names);
  switch (format) {
    case LineageFormat::Dot:
      return export_dot(fs, lt, labels);
    case LineageFormat::Newick:
      return export_newick(fs, lt, labels);
    case LineageFormat::Json:
      return export_json(fs, lt, labels, templates);
  }
  throw Unsupported("unsupported export format");
}

}  // namespace llt
