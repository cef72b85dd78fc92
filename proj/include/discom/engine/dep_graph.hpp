#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "discom/engine/ast.hpp"
#include "discom/model/workbook.hpp"

namespace discom::engine {

/// Every cell a formula could read, on any branch. Ranges expand to each
/// covered cell; sheet-less references resolve to `host_sheet`.
std::set<model::CellAddress> references(const FormulaAst& ast, const std::string& host_sheet);

/// Cell dependency graph with edges precedent -> dependent.
///
/// Node ids are assigned in row-major address order, so comparing ids is the
/// deterministic tie-break used by the topological sort.
class DepGraph {
 public:
  using NodeId = std::uint32_t;

  std::size_t size() const noexcept { return nodes_.size(); }
  const model::CellAddress& address(NodeId id) const { return nodes_[id]; }
  std::optional<NodeId> find(const model::CellAddress& addr) const;

  const std::vector<NodeId>& dependents(NodeId id) const { return dependents_[id]; }
  const std::vector<NodeId>& precedents(NodeId id) const { return precedents_[id]; }
  std::size_t edge_count() const noexcept { return edges_; }

  /// Topological order of every node not on, or downstream of, a cycle.
  const std::vector<NodeId>& topo_order() const noexcept { return topo_; }
  /// Nodes on a cycle (strongly connected component of size > 1, or a self
  /// reference), ascending.
  const std::vector<NodeId>& cycle_witnesses() const noexcept { return witnesses_; }
  /// True for cycle members and everything reachable from them.
  bool blocked(NodeId id) const { return blocked_[id]; }

  /// Seeds plus everything reachable from them, as a membership mask.
  std::vector<bool> closure(const std::vector<NodeId>& seeds) const;

  friend DepGraph build_dep_graph(const model::Workbook& wb);

 private:
  void finalize();

  std::vector<model::CellAddress> nodes_;
  std::map<model::CellAddress, NodeId> index_;
  std::vector<std::vector<NodeId>> dependents_;
  std::vector<std::vector<NodeId>> precedents_;
  std::size_t edges_ = 0;
  std::vector<NodeId> topo_;
  std::vector<NodeId> witnesses_;
  std::vector<bool> blocked_;
};

DepGraph build_dep_graph(const model::Workbook& wb);

}  // namespace discom::engine
