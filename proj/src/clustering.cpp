#include "llt/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "llt/error.hpp"
#include "llt/newick.hpp"

namespace llt {

using nlohmann::json;

Dendrogram::Dendrogram(std::vector<std::string> leaves, std::vector<Merge> merges)
    : leaves_(std::move(leaves)), merges_(std::move(merges)) {
  const std::size_t n = leaves_.size();
  if (n == 0) {
    if (!merges_.empty()) throw Inconsistent("merges without leaves");
    return;
  }
  if (merges_.size() != n - 1) throw Inconsistent("a tree over n leaves needs n-1 merges");
  parents_.assign(2 * n - 1, 2 * n - 2);
  std::vector<bool> used(2 * n - 1, false);
  for (std::size_t k = 0; k < merges_.size(); ++k) {
    const auto& m = merges_[k];
    NodeId self = n + k;
    if (m.left >= self || m.right >= self || m.left == m.right) throw Inconsistent("merge references a later node");
    if (used[m.left] || used[m.right]) throw Inconsistent("node merged twice");
    if (m.size != size(m.left) + size(m.right)) throw Inconsistent("merge size is not the sum of its children");
    if (!(m.height >= 0.0) || !std::isfinite(m.height)) throw Inconsistent("merge height must be finite and >= 0");
    if (k > 0 && m.height < merges_[k - 1].height) throw Inconsistent("merge heights decrease");
    used[m.left] = used[m.right] = true;
    parents_[m.left] = self;
    parents_[m.right] = self;
  }
}

const Merge& Dendrogram::merge_of(NodeId internal) const {
  if (is_leaf(internal) || !contains(internal)) throw NotFound("not an internal node: " + std::to_string(internal));
  return merges_[internal - leaves_.size()];
}

double Dendrogram::height(NodeId node) const { return is_leaf(node) ? 0.0 : merge_of(node).height; }

std::size_t Dendrogram::size(NodeId node) const { return is_leaf(node) ? 1 : merge_of(node).size; }

std::vector<std::size_t> Dendrogram::members(NodeId node) const {
  if (!contains(node)) throw NotFound("no such node: " + std::to_string(node));
  std::vector<std::size_t> out;
  std::vector<NodeId> stack{node};
  while (!stack.empty()) {
    NodeId cur = stack.back();
    stack.pop_back();
    if (is_leaf(cur)) {
      out.push_back(cur);
    } else {
      const auto& m = merge_of(cur);
      stack.push_back(m.left);
      stack.push_back(m.right);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool Dendrogram::descends_from(NodeId node, NodeId ancestor) const {
  // Parents always carry a larger id than their children.
  while (node < ancestor) {
    NodeId p = parents_[node];
    if (p == node) return false;
    node = p;
  }
  return node == ancestor;
}

NodeId Dendrogram::lowest_common_ancestor(NodeId a, NodeId b) const {
  if (!contains(a) || !contains(b)) throw NotFound("no such node");
  while (a != b) {
    if (a < b) {
      a = parents_[a];
    } else {
      b = parents_[b];
    }
  }
  return a;
}

json Dendrogram::to_json() const {
  json merges = json::array();
  for (std::size_t k = 0; k < merges_.size(); ++k) {
    const auto& m = merges_[k];
    merges.push_back({{"node", leaves_.size() + k},
                      {"left", m.left},
                      {"right", m.right},
                      {"height", m.height},
                      {"size", m.size}});
  }
  return {{"format", "llt-dendrogram"}, {"version", 1}, {"leaves", leaves_}, {"merges", std::move(merges)}};
}

Dendrogram Dendrogram::from_json(const json& j) {
  try {
    if (j.at("format") != "llt-dendrogram" || j.at("version") != 1) {
      throw ParseError("not an llt-dendrogram v1 document");
    }
    std::vector<Merge> merges;
    for (const auto& m : j.at("merges")) {
      merges.push_back({m.at("left").get<NodeId>(), m.at("right").get<NodeId>(), m.at("height").get<double>(),
                        m.at("size").get<std::size_t>()});
    }
    return Dendrogram(j.at("leaves").get<std::vector<std::string>>(), std::move(merges));
  } catch (const json::exception& e) {
    throw ParseError(std::string("dendrogram: ") + e.what());
  }
}

void Dendrogram::write_merge_csv(std::ostream& out) const {
  out << "left,right,height,size\n";
  char buf[64];
  for (const auto& m : merges_) {
    std::snprintf(buf, sizeof buf, "%.17g", m.height);
    out << m.left << ',' << m.right << ',' << buf << ',' << m.size << '\n';
  }
}

std::string Dendrogram::to_newick(const std::vector<std::string>* labels) const {
  if (leaves_.empty()) return ";";
  if (labels && labels->size() != leaves_.size()) throw std::invalid_argument("label count differs from leaf count");
  const auto& names = labels ? *labels : leaves_;
  std::string out;
  // Iterative post-order keeps deep caterpillar trees off the call stack.
  struct Frame {
    NodeId node;
    int stage;
  };
  std::vector<Frame> stack{{root(), 0}};
  auto branch = [&](NodeId node) {
    if (node == root()) return;
    out += ':';
    out += format_newick_length(height(parent(node)) - height(node));
  };
  while (!stack.empty()) {
    auto& f = stack.back();
    if (is_leaf(f.node)) {
      out += quote_newick_label(names[f.node]);
      branch(f.node);
      stack.pop_back();
      continue;
    }
    const auto& m = merge_of(f.node);
    if (f.stage == 0) {
      out += '(';
      f.stage = 1;
      stack.push_back({m.left, 0});
    } else if (f.stage == 1) {
      out += ',';
      f.stage = 2;
      stack.push_back({m.right, 0});
    } else {
      out += ')';
      NodeId node = f.node;
      stack.pop_back();
      branch(node);
    }
  }
  out += ';';
  return out;
}

std::string Dendrogram::to_dot() const {
  std::ostringstream out;
  out << "digraph dendrogram {\n  node [shape=point];\n";
  char buf[64];
  for (std::size_t i = 0; i < leaves_.size(); ++i) {
    out << "  n" << i << " [shape=plaintext, label=\"" << leaves_[i].substr(0, 12) << "\"];\n";
  }
  for (std::size_t k = 0; k < merges_.size(); ++k) {
    const auto& m = merges_[k];
    NodeId self = leaves_.size() + k;
    std::snprintf(buf, sizeof buf, "%.6g", m.height);
    out << "  n" << self << " [xlabel=\"" << buf << "\"];\n";
    out << "  n" << self << " -> n" << m.left << ";\n";
    out << "  n" << self << " -> n" << m.right << ";\n";
  }
  out << "}\n";
  return out.str();
}

namespace {

std::vector<std::string> default_labels(std::vector<std::string> labels, std::size_t n) {
  if (labels.empty()) {
    labels.reserve(n);
    for (std::size_t i = 0; i < n; ++i) labels.push_back(std::to_string(i));
  }
  if (labels.size() != n) throw std::invalid_argument("leaf label count differs from matrix size");
  return labels;
}

// Shared merge-selection rule: find the minimum cost, then among all pairs
// within tolerance of it take the lexicographically smallest node-id pair.
// Both the fast path and the references use it, so near-ties resolve the
// same way regardless of rounding in how the costs were obtained.
struct Candidate {
  std::size_t a;  // slot indices
  std::size_t b;
  double cost;
};

constexpr double kTieTolerance = 1e-9;

template <typename CostFn>
Candidate select_pair(const std::vector<std::size_t>& active, const std::vector<NodeId>& ids, CostFn&& cost) {
  double best = std::numeric_limits<double>::infinity();
  std::vector<Candidate> all;
  all.reserve(active.size() * (active.size() - 1) / 2);
  for (std::size_t x = 0; x < active.size(); ++x) {
    for (std::size_t y = x + 1; y < active.size(); ++y) {
      double c = cost(active[x], active[y]);
      all.push_back({active[x], active[y], c});
      best = std::min(best, c);
    }
  }
  const double limit = best + kTieTolerance * std::max(1.0, best);
  const Candidate* pick = nullptr;
  auto key = [&](const Candidate& c) {
    NodeId p = ids[c.a];
    NodeId q = ids[c.b];
    return std::pair{std::min(p, q), std::max(p, q)};
  };
  for (const auto& c : all) {
    if (c.cost > limit) continue;
    if (!pick || key(c) < key(*pick)) pick = &c;
  }
  return *pick;
}

// Runs the generic agglomeration loop. `cost(a, b)` gives the linkage between
// the clusters in slots a and b; `merged(a, b)` folds slot b into slot a.
template <typename CostFn, typename MergeFn>
Dendrogram run_agglomeration(std::size_t n, std::vector<std::string> labels, CostFn&& cost, MergeFn&& merged) {
  if (n == 0) throw InvalidMatrix("cannot cluster an empty matrix");
  std::vector<NodeId> ids(n);
  std::vector<std::size_t> sizes(n, 1);
  std::vector<std::size_t> active(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = active[i] = i;
  std::vector<Merge> merges;
  merges.reserve(n - 1);
  for (std::size_t step = 0; step + 1 < n; ++step) {
    Candidate c = select_pair(active, ids, cost);
    NodeId l = std::min(ids[c.a], ids[c.b]);
    NodeId r = std::max(ids[c.a], ids[c.b]);
    double h = c.cost;
    if (!merges.empty()) {
      double prev = merges.back().height;
      if (h < prev) {
        if (prev - h > kTieTolerance * std::max(1.0, prev)) throw InvalidMatrix("linkage inversion: input is not Euclidean");
        h = prev;  // rounding noise only
      }
    }
    merges.push_back({l, r, h, sizes[c.a] + sizes[c.b]});
    merged(c.a, c.b);
    sizes[c.a] += sizes[c.b];
    ids[c.a] = n + step;
    active.erase(std::find(active.begin(), active.end(), c.b));
  }
  return Dendrogram(std::move(labels), std::move(merges));
}

}  // namespace

Dendrogram agglomerate(const DistanceMatrix& matrix, std::vector<std::string> leaf_labels) {
  const std::size_t n = matrix.size();
  auto labels = default_labels(std::move(leaf_labels), n);
  // Squared linkage distances between slots; slot i keeps the cluster that
  // took over row i.
  std::vector<double> d2(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) d2[i * n + j] = matrix(i, j) * matrix(i, j);
  }
  std::vector<double> sizes(n, 1.0);
  std::vector<bool> alive(n, true);
  auto cost = [&](std::size_t a, std::size_t b) { return std::sqrt(d2[a * n + b]); };
  auto merged = [&](std::size_t a, std::size_t b) {
    const double ni = sizes[a];
    const double nj = sizes[b];
    const double dij = d2[a * n + b];
    for (std::size_t k = 0; k < n; ++k) {
      if (!alive[k] || k == a || k == b) continue;
      const double nk = sizes[k];
      double v = ((ni + nk) * d2[k * n + a] + (nj + nk) * d2[k * n + b] - nk * dij) / (ni + nj + nk);
      v = std::max(v, 0.0);
      d2[k * n + a] = d2[a * n + k] = v;
    }
    sizes[a] = ni + nj;
    alive[b] = false;
  };
  return run_agglomeration(n, std::move(labels), cost, merged);
}

Dendrogram agglomerate(const std::vector<std::vector<double>>& square, std::vector<std::string> leaf_labels) {
  return agglomerate(DistanceMatrix::from_square(square), std::move(leaf_labels));
}

Dendrogram naive_agglomerate(const std::vector<std::vector<double>>& points, std::vector<std::string> leaf_labels) {
  const std::size_t n = points.size();
  if (n == 0) throw InvalidMatrix("cannot cluster an empty point set");
  const std::size_t dims = points[0].size();
  for (const auto& p : points) {
    if (p.size() != dims) throw DimensionMismatch("points differ in dimensionality");
  }
  auto labels = default_labels(std::move(leaf_labels), n);
  std::vector<std::vector<std::size_t>> members(n);
  for (std::size_t i = 0; i < n; ++i) members[i] = {i};
  auto centroid = [&](const std::vector<std::size_t>& m) {
    std::vector<double> c(dims, 0.0);
    for (auto i : m) {
      for (std::size_t d = 0; d < dims; ++d) c[d] += points[i][d];
    }
    for (auto& v : c) v /= static_cast<double>(m.size());
    return c;
  };
  auto cost = [&](std::size_t a, std::size_t b) {
    // Ward cost on the distance scale: sqrt(2 * increase in within-cluster
    // sum of squares) = sqrt(2 na nb / (na + nb)) * |ca - cb|.
    auto ca = centroid(members[a]);
    auto cb = centroid(members[b]);
    double s = 0.0;
    for (std::size_t d = 0; d < dims; ++d) s += (ca[d] - cb[d]) * (ca[d] - cb[d]);
    double na = static_cast<double>(members[a].size());
    double nb = static_cast<double>(members[b].size());
    return std::sqrt(2.0 * na * nb / (na + nb) * s);
  };
  auto merged = [&](std::size_t a, std::size_t b) {
    members[a].insert(members[a].end(), members[b].begin(), members[b].end());
    members[b].clear();
  };
  return run_agglomeration(n, std::move(labels), cost, merged);
}

Dendrogram naive_agglomerate(const DistanceMatrix& matrix, std::vector<std::string> leaf_labels) {
  const std::size_t n = matrix.size();
  auto labels = default_labels(std::move(leaf_labels), n);
  std::vector<std::vector<std::size_t>> members(n);
  for (std::size_t i = 0; i < n; ++i) members[i] = {i};
  // Within-cluster sum of squares from pairwise distances alone:
  // ESS(C) = (1/|C|) * sum_{i<j in C} d_ij^2.
  auto ess = [&](const std::vector<std::size_t>& m) {
    double s = 0.0;
    for (std::size_t x = 0; x < m.size(); ++x) {
      for (std::size_t y = x + 1; y < m.size(); ++y) s += matrix(m[x], m[y]) * matrix(m[x], m[y]);
    }
    return s / static_cast<double>(m.size());
  };
  auto cost = [&](std::size_t a, std::size_t b) {
    std::vector<std::size_t> both = members[a];
    both.insert(both.end(), members[b].begin(), members[b].end());
    double increase = ess(both) - ess(members[a]) - ess(members[b]);
    return std::sqrt(std::max(0.0, 2.0 * increase));
  };
  auto merged = [&](std::size_t a, std::size_t b) {
    members[a].insert(members[a].end(), members[b].begin(), members[b].end());
    members[b].clear();
  };
  return run_agglomeration(n, std::move(labels), cost, merged);
}

std::size_t Partition::group_of(std::size_t leaf) const {
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (std::binary_search(groups[g].members.begin(), groups[g].members.end(), leaf)) return g;
  }
  throw NotFound("leaf " + std::to_string(leaf) + " is in no group");
}

std::vector<std::size_t> Partition::labels(std::size_t leaf_count) const {
  std::vector<std::size_t> out(leaf_count, static_cast<std::size_t>(-1));
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (auto leaf : groups[g].members) out.at(leaf) = g;
  }
  return out;
}

json Partition::to_json(const Dendrogram& tree) const {
  json groups_json = json::array();
  for (const auto& g : groups) {
    json ids = json::array();
    for (auto leaf : g.members) ids.push_back(tree.leaves()[leaf]);
    groups_json.push_back({{"anchor", g.anchor}, {"height", tree.height(g.anchor)}, {"members", g.members}, {"ids", ids}});
  }
  return {{"format", "llt-partition"}, {"version", 1}, {"threshold", threshold}, {"groups", std::move(groups_json)}};
}

Partition cut(const Dendrogram& tree, double threshold) {
  if (!(threshold >= 0.0)) throw std::invalid_argument("threshold must be >= 0");
  Partition p;
  p.threshold = threshold;
  if (tree.leaf_count() == 0) return p;
  std::vector<NodeId> stack{tree.root()};
  while (!stack.empty()) {
    NodeId node = stack.back();
    stack.pop_back();
    if (tree.height(node) <= threshold) {
      p.groups.push_back({node, tree.members(node)});
    } else {
      const auto& m = tree.merge_of(node);
      stack.push_back(m.left);
      stack.push_back(m.right);
    }
  }
  std::sort(p.groups.begin(), p.groups.end(),
            [](const Group& a, const Group& b) { return a.members.front() < b.members.front(); });
  return p;
}

double suggest_threshold(const Dendrogram& tree) {
  if (tree.merges().empty()) throw std::invalid_argument("suggest_threshold needs at least two leaves");
  std::vector<double> h;
  for (const auto& m : tree.merges()) h.push_back(m.height);
  std::sort(h.begin(), h.end());
  if (h.size() == 1) return h[0];
  // Gaps are measured as log(1 + h) differences; the first maximal gap wins.
  std::size_t best = 0;
  double best_gap = -1.0;
  for (std::size_t i = 0; i + 1 < h.size(); ++i) {
    double gap = std::log1p(h[i + 1]) - std::log1p(h[i]);
    if (gap > best_gap + 1e-12) {
      best_gap = gap;
      best = i;
    }
  }
  return 0.5 * (h[best] + h[best + 1]);
}

}  // namespace llt
