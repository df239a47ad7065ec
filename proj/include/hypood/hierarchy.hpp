#pragma once

#include <cstddef>
#include <istream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace hypood {

using NodeId = std::size_t;

struct Edge {
  std::string parent;
  std::string child;

  friend bool operator==(const Edge&, const Edge&) = default;
};

// Rooted tree over string-labelled nodes. Node indices follow the order in
// which nodes first appear in the edge list, so matrices indexed by node are
// deterministic for a given input file. Immutable after construction.
class Hierarchy {
 public:
  // Throws ParseError on self loops, cycles, duplicate edges, nodes with more
  // than one parent, and forests with several roots.
  static Hierarchy from_edges(const std::vector<Edge>& edges);

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(NodeId i) const { return names_.at(i); }
  const std::vector<Edge>& edges() const { return edges_; }

  // Throws UsageError for unknown ids.
  NodeId index_of(std::string_view name) const;
  bool contains(std::string_view name) const;

  NodeId root() const { return root_; }
  // Parent index; the root is its own parent.
  NodeId parent(NodeId i) const { return parent_.at(i); }
  const std::vector<NodeId>& children(NodeId i) const { return children_.at(i); }
  int level(NodeId i) const { return level_.at(i); }
  int max_level() const { return max_level_; }
  bool is_leaf(NodeId i) const { return children_.at(i).empty(); }
  // Leaves in node order.
  const std::vector<NodeId>& leaves() const { return leaves_; }
  // Nodes grouped by level, each group in node order.
  std::vector<std::vector<NodeId>> nodes_by_level() const;
  // Undirected neighbours (parent + children) in node order.
  std::vector<NodeId> neighbors(NodeId i) const;

  // Sub-hierarchy induced by the kept nodes. keep must be closed under taking
  // parents and must contain the root.
  Hierarchy restricted_to(const std::vector<bool>& keep) const;
  // Sub-hierarchy containing the given leaves and all of their ancestors.
  Hierarchy restricted_to_leaves(const std::vector<std::string>& leaves) const;

  friend bool operator==(const Hierarchy&, const Hierarchy&) = default;

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, NodeId> index_;
  std::vector<Edge> edges_;
  std::vector<NodeId> parent_;
  std::vector<std::vector<NodeId>> children_;
  std::vector<int> level_;
  std::vector<NodeId> leaves_;
  NodeId root_ = 0;
  int max_level_ = 0;

  friend Hierarchy parse_edge_list(std::istream& in);
  static Hierarchy build(const std::vector<Edge>& edges, const std::vector<std::size_t>& lines);
};

// Reads "parent<TAB>child" lines. Blank lines and lines starting with '#' are
// skipped. Errors name the offending line (1-based) or node.
Hierarchy parse_edge_list(std::istream& in);
Hierarchy parse_edge_list(std::string_view text);
Hierarchy load_hierarchy(const std::string& path);

std::string serialize_edge_list(const Hierarchy& h);
void save_hierarchy(const std::string& path, const Hierarchy& h);

// Leaf-marker file: one in-distribution class id per line, '#' comments allowed.
// Every id must be a leaf of h.
std::vector<std::string> parse_leaf_markers(std::istream& in, const Hierarchy& h);

// Dense symmetric matrix of undirected hop counts.
class GraphDistances {
 public:
  GraphDistances() = default;
  GraphDistances(std::size_t n, std::vector<int> hops) : n_(n), hops_(std::move(hops)) {}

  std::size_t size() const { return n_; }
  int operator()(std::size_t i, std::size_t j) const { return hops_[i * n_ + j]; }
  const std::vector<int>& data() const { return hops_; }

 private:
  std::size_t n_ = 0;
  std::vector<int> hops_;
};

// One BFS per source over the undirected tree (unit-weight Dijkstra).
GraphDistances all_pairs_distances(const Hierarchy& h);

struct LcaResult {
  NodeId node;
  // level(reference) - level(node): edges from the LCA down to the reference.
  int height;
};

// Deepest common ancestor of reference and other. The height is measured
// along the reference branch, so lca(h, u, u) = {u, 0}.
LcaResult lca(const Hierarchy& h, NodeId reference, NodeId other);
LcaResult lca(const Hierarchy& h, std::string_view reference, std::string_view other);

}  // namespace hypood
