#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "llt/features.hpp"

namespace llt {

/// Node ids follow the usual linkage convention: leaves are 0..n-1 and the
/// k-th merge creates node n+k.
using NodeId = std::size_t;

struct Merge {
  NodeId left = 0;  // left < right
  NodeId right = 0;
  double height = 0.0;
  std::size_t size = 0;

  bool operator==(const Merge&) const = default;
};

/// Binary merge tree. Heights are non-decreasing along `merges()`, and there
/// are exactly leaf_count()-1 merges.
class Dendrogram {
 public:
  Dendrogram() = default;
  /// Validates the merge table; throws Inconsistent on a malformed one.
  Dendrogram(std::vector<std::string> leaves, std::vector<Merge> merges);

  std::size_t leaf_count() const { return leaves_.size(); }
  std::size_t node_count() const { return leaves_.empty() ? 0 : 2 * leaves_.size() - 1; }
  const std::vector<std::string>& leaves() const { return leaves_; }
  const std::vector<Merge>& merges() const { return merges_; }

  NodeId root() const { return node_count() - 1; }
  bool is_leaf(NodeId node) const { return node < leaves_.size(); }
  bool contains(NodeId node) const { return node < node_count(); }
  const Merge& merge_of(NodeId internal) const;
  double height(NodeId node) const;
  std::size_t size(NodeId node) const;
  /// Parent of `node`, or the node itself for the root.
  NodeId parent(NodeId node) const { return parents_.at(node); }
  /// Leaf indices under `node`, ascending.
  std::vector<std::size_t> members(NodeId node) const;
  /// Is `node` inside the subtree rooted at `ancestor` (inclusive)?
  bool descends_from(NodeId node, NodeId ancestor) const;
  NodeId lowest_common_ancestor(NodeId a, NodeId b) const;

  nlohmann::json to_json() const;
  static Dendrogram from_json(const nlohmann::json& j);
  /// "left,right,height,size" with one row per merge in merge order.
  void write_merge_csv(std::ostream& out) const;
  /// Branch length = parent height - child height. `labels` replaces the
  /// leaf ids when given (must have leaf_count() entries).
  std::string to_newick(const std::vector<std::string>* labels = nullptr) const;
  std::string to_dot() const;

  bool operator==(const Dendrogram& other) const {
    return leaves_ == other.leaves_ && merges_ == other.merges_;
  }

 private:
  std::vector<std::string> leaves_;
  std::vector<Merge> merges_;
  std::vector<NodeId> parents_;
};

/// Ward agglomeration over a Euclidean distance matrix with Lance-Williams
/// updates. Ties (within a relative 1e-9 of the minimum) go to the
/// lexicographically smallest node-id pair. Heights are on the input
/// distance scale.
Dendrogram agglomerate(const DistanceMatrix& matrix, std::vector<std::string> leaf_labels = {});
Dendrogram agglomerate(const std::vector<std::vector<double>>& square,
                       std::vector<std::string> leaf_labels = {});

/// Slow reference: recomputes every candidate merge cost from cluster
/// centroids of the raw points at every step.
Dendrogram naive_agglomerate(const std::vector<std::vector<double>>& points,
                             std::vector<std::string> leaf_labels = {});
/// Slow reference working from the matrix alone: the Ward cost of joining A
/// and B is recomputed from within-cluster sums of squared pairwise distances.
Dendrogram naive_agglomerate(const DistanceMatrix& matrix, std::vector<std::string> leaf_labels = {});

struct Group {
  NodeId anchor = 0;
  std::vector<std::size_t> members;

  bool operator==(const Group&) const = default;
};

/// Maximal subtrees whose root height is <= threshold, ordered by smallest
/// member leaf.
struct Partition {
  double threshold = 0.0;
  std::vector<Group> groups;

  std::size_t group_of(std::size_t leaf) const;
  /// Group index per leaf.
  std::vector<std::size_t> labels(std::size_t leaf_count) const;
  nlohmann::json to_json(const Dendrogram& tree) const;
};

/// Throws std::invalid_argument for a negative or NaN threshold.
Partition cut(const Dendrogram& tree, double threshold);

/// Midpoint of the widest gap between consecutive sorted merge heights,
/// where gap width is log(1 + upper) - log(1 + lower); the lowest of equal
/// gaps wins. Advisory only. Throws std::invalid_argument without merges.
double suggest_threshold(const Dendrogram& tree);

}  // namespace llt
