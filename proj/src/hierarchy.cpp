#include "hypood/hierarchy.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "hypood/errors.hpp"

namespace hypood {

namespace {

constexpr NodeId kNoParent = std::numeric_limits<NodeId>::max();

std::string where(const std::vector<std::size_t>& lines, std::size_t edge) {
  if (edge < lines.size()) return "line " + std::to_string(lines[edge]);
  return "edge " + std::to_string(edge + 1);
}

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

}  // namespace

Hierarchy Hierarchy::from_edges(const std::vector<Edge>& edges) { return build(edges, {}); }

Hierarchy Hierarchy::build(const std::vector<Edge>& edges, const std::vector<std::size_t>& lines) {
  if (edges.empty()) throw ParseError("hierarchy has no edges");
  Hierarchy h;
  auto intern = [&h](const std::string& name) {
    auto [it, inserted] = h.index_.try_emplace(name, h.names_.size());
    if (inserted) {
      h.names_.push_back(name);
      h.parent_.push_back(kNoParent);
      h.children_.emplace_back();
    }
    return it->second;
  };

  std::set<std::pair<NodeId, NodeId>> seen;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto& [p, c] = edges[e];
    if (p.empty() || c.empty()) throw ParseError(where(lines, e) + ": empty node id");
    if (p == c) throw ParseError(where(lines, e) + ": cycle detected (self loop on '" + p + "')");
    const NodeId pi = intern(p);
    const NodeId ci = intern(c);
    if (!seen.emplace(pi, ci).second) {
      throw ParseError(where(lines, e) + ": duplicate edge '" + p + "' -> '" + c + "'");
    }
    if (h.parent_[ci] != kNoParent) {
      throw ParseError(where(lines, e) + ": node '" + c +
                       "' has more than one parent (only trees are supported)");
    }
    h.parent_[ci] = pi;
    h.children_[pi].push_back(ci);
    h.edges_.push_back(edges[e]);
  }

  std::vector<NodeId> roots;
  for (NodeId i = 0; i < h.names_.size(); ++i) {
    if (h.parent_[i] == kNoParent) roots.push_back(i);
  }
  if (roots.empty()) throw ParseError("cycle detected: no root node");
  if (roots.size() > 1) {
    std::string msg = "multiple roots:";
    for (auto r : roots) msg += " '" + h.names_[r] + "'";
    throw ParseError(msg);
  }
  h.root_ = roots.front();
  h.parent_[h.root_] = h.root_;

  h.level_.assign(h.names_.size(), -1);
  h.level_[h.root_] = 0;
  std::deque<NodeId> queue{h.root_};
  while (!queue.empty()) {
    const NodeId u = queue.front();
    queue.pop_front();
    for (NodeId v : h.children_[u]) {
      h.level_[v] = h.level_[u] + 1;
      queue.push_back(v);
    }
  }
  for (NodeId i = 0; i < h.names_.size(); ++i) {
    if (h.level_[i] < 0) {
      throw ParseError("cycle detected: node '" + h.names_[i] + "' is not reachable from root '" +
                       h.names_[h.root_] + "'");
    }
    h.max_level_ = std::max(h.max_level_, h.level_[i]);
    if (h.children_[i].empty()) h.leaves_.push_back(i);
  }
  return h;
}

NodeId Hierarchy::index_of(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw UsageError("unknown node id '" + std::string(name) + "'");
  return it->second;
}

bool Hierarchy::contains(std::string_view name) const {
  return index_.count(std::string(name)) != 0;
}

std::vector<std::vector<NodeId>> Hierarchy::nodes_by_level() const {
  std::vector<std::vector<NodeId>> out(static_cast<std::size_t>(max_level_) + 1);
  for (NodeId i = 0; i < size(); ++i) out[static_cast<std::size_t>(level_[i])].push_back(i);
  return out;
}

std::vector<NodeId> Hierarchy::neighbors(NodeId i) const {
  std::vector<NodeId> out = children_.at(i);
  if (i != root_) out.push_back(parent_[i]);
  std::sort(out.begin(), out.end());
  return out;
}

Hierarchy Hierarchy::restricted_to(const std::vector<bool>& keep) const {
  if (keep.size() != size()) throw UsageError("keep mask size does not match hierarchy");
  if (!keep[root_]) throw UsageError("cannot drop the root");
  std::vector<Edge> kept;
  for (const auto& e : edges_) {
    const NodeId p = index_.at(e.parent);
    const NodeId c = index_.at(e.child);
    if (keep[c] && !keep[p]) throw UsageError("keep mask is not closed under parents at '" + e.child + "'");
    if (keep[c]) kept.push_back(e);
  }
  return from_edges(kept);
}

Hierarchy Hierarchy::restricted_to_leaves(const std::vector<std::string>& leaves) const {
  std::vector<bool> keep(size(), false);
  keep[root_] = true;
  for (const auto& name : leaves) {
    NodeId i = index_of(name);
    if (!is_leaf(i)) throw UsageError("'" + name + "' is not a leaf");
    while (!keep[i]) {
      keep[i] = true;
      i = parent_[i];
    }
  }
  return restricted_to(keep);
}

Hierarchy parse_edge_list(std::istream& in) {
  std::vector<Edge> edges;
  std::vector<std::size_t> lines;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto tab = body.find('\t');
    if (tab == std::string_view::npos || body.find('\t', tab + 1) != std::string_view::npos) {
      throw ParseError("line " + std::to_string(lineno) + ": expected 'parent<TAB>child'");
    }
    edges.push_back({std::string(trim(body.substr(0, tab))), std::string(trim(body.substr(tab + 1)))});
    lines.push_back(lineno);
  }
  return Hierarchy::build(edges, lines);
}

Hierarchy parse_edge_list(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_edge_list(in);
}

Hierarchy load_hierarchy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open hierarchy file: " + path);
  return parse_edge_list(in);
}

std::string serialize_edge_list(const Hierarchy& h) {
  std::string out;
  for (const auto& e : h.edges()) out += e.parent + '\t' + e.child + '\n';
  return out;
}

void save_hierarchy(const std::string& path, const Hierarchy& h) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write hierarchy file: " + path);
  out << serialize_edge_list(h);
}

std::vector<std::string> parse_leaf_markers(std::istream& in, const Hierarchy& h) {
  std::vector<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    std::string id(body);
    if (!h.contains(id)) throw ParseError("line " + std::to_string(lineno) + ": unknown node '" + id + "'");
    if (!h.is_leaf(h.index_of(id))) {
      throw ParseError("line " + std::to_string(lineno) + ": '" + id + "' is not a leaf");
    }
    ids.push_back(std::move(id));
  }
  return ids;
}

GraphDistances all_pairs_distances(const Hierarchy& h) {
  const std::size_t n = h.size();
  std::vector<std::vector<NodeId>> adj(n);
  for (NodeId i = 0; i < n; ++i) adj[i] = h.neighbors(i);

  std::vector<int> hops(n * n, -1);
  std::vector<NodeId> queue;
  queue.reserve(n);
  for (NodeId s = 0; s < n; ++s) {
    int* row = hops.data() + s * n;
    row[s] = 0;
    queue.assign(1, s);
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const NodeId u = queue[head];
      for (NodeId v : adj[u]) {
        if (row[v] < 0) {
          row[v] = row[u] + 1;
          queue.push_back(v);
        }
      }
    }
  }
  return {n, std::move(hops)};
}

LcaResult lca(const Hierarchy& h, NodeId reference, NodeId other) {
  if (reference >= h.size() || other >= h.size()) throw UsageError("lca: node index out of range");
  NodeId a = reference;
  NodeId b = other;
  while (h.level(a) > h.level(b)) a = h.parent(a);
  while (h.level(b) > h.level(a)) b = h.parent(b);
  while (a != b) {
    a = h.parent(a);
    b = h.parent(b);
  }
  return {a, h.level(reference) - h.level(a)};
}

LcaResult lca(const Hierarchy& h, std::string_view reference, std::string_view other) {
  return lca(h, h.index_of(reference), h.index_of(other));
}

}  // namespace hypood
