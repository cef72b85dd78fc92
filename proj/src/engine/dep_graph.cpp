#include "discom/engine/dep_graph.hpp"

#include <algorithm>
#include <functional>
#include <queue>

namespace discom::engine {

namespace {

void collect(const Expr& e, const std::string& host, std::set<model::CellAddress>& out) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, CellRef>) {
          out.insert(resolve(n, host));
        } else if constexpr (std::is_same_v<T, RangeLit>) {
          for (auto& a : model::range_cells(resolve(n, host))) out.insert(std::move(a));
        } else if constexpr (std::is_same_v<T, Unary>) {
          collect(*n.operand, host, out);
        } else if constexpr (std::is_same_v<T, Binary>) {
          collect(*n.lhs, host, out);
          collect(*n.rhs, host, out);
        } else if constexpr (std::is_same_v<T, Call>) {
          for (const auto& a : n.args) collect(*a, host, out);
        }
      },
      e.node);
}

}  // namespace

std::set<model::CellAddress> references(const FormulaAst& ast, const std::string& host_sheet) {
  std::set<model::CellAddress> out;
  collect(*ast.root, host_sheet, out);
  return out;
}

std::optional<DepGraph::NodeId> DepGraph::find(const model::CellAddress& addr) const {
  auto it = index_.find(addr);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<bool> DepGraph::closure(const std::vector<NodeId>& seeds) const {
  std::vector<bool> seen(nodes_.size(), false);
  std::vector<NodeId> stack;
  for (auto s : seeds) {
    if (!seen[s]) {
      seen[s] = true;
      stack.push_back(s);
    }
  }
  while (!stack.empty()) {
    auto n = stack.back();
    stack.pop_back();
    for (auto d : dependents_[n]) {
      if (!seen[d]) {
        seen[d] = true;
        stack.push_back(d);
      }
    }
  }
  return seen;
}

void DepGraph::finalize() {
  const auto n = static_cast<NodeId>(nodes_.size());

  // Kahn's algorithm, smallest id first.
  std::vector<std::size_t> indegree(n);
  for (NodeId i = 0; i < n; ++i) indegree[i] = precedents_[i].size();
  std::priority_queue<NodeId, std::vector<NodeId>, std::greater<>> ready;
  for (NodeId i = 0; i < n; ++i)
    if (indegree[i] == 0) ready.push(i);
  blocked_.assign(n, true);
  topo_.reserve(n);
  while (!ready.empty()) {
    auto v = ready.top();
    ready.pop();
    topo_.push_back(v);
    blocked_[v] = false;
    for (auto d : dependents_[v])
      if (--indegree[d] == 0) ready.push(d);
  }
  if (topo_.size() == n) return;

  // Iterative Tarjan over the leftover nodes to separate cycle members from
  // nodes that are merely downstream of one.
  std::vector<std::int64_t> order(n, -1), low(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<NodeId> scc_stack;
  std::int64_t counter = 0;
  struct Frame {
    NodeId v;
    std::size_t next;
  };
  for (NodeId root = 0; root < n; ++root) {
    if (!blocked_[root] || order[root] != -1) continue;
    std::vector<Frame> frames{{root, 0}};
    order[root] = low[root] = counter++;
    scc_stack.push_back(root);
    on_stack[root] = true;
    while (!frames.empty()) {
      auto& f = frames.back();
      const auto& out = dependents_[f.v];
      if (f.next < out.size()) {
        auto w = out[f.next++];
        if (!blocked_[w]) continue;
        if (order[w] == -1) {
          order[w] = low[w] = counter++;
          scc_stack.push_back(w);
          on_stack[w] = true;
          frames.push_back({w, 0});
        } else if (on_stack[w]) {
          low[f.v] = std::min(low[f.v], order[w]);
        }
        continue;
      }
      auto v = f.v;
      frames.pop_back();
      if (!frames.empty()) low[frames.back().v] = std::min(low[frames.back().v], low[v]);
      if (low[v] != order[v]) continue;
      std::vector<NodeId> component;
      NodeId w;
      do {
        w = scc_stack.back();
        scc_stack.pop_back();
        on_stack[w] = false;
        component.push_back(w);
      } while (w != v);
      bool self_loop = component.size() == 1 &&
                       std::find(dependents_[v].begin(), dependents_[v].end(), v) != dependents_[v].end();
      if (component.size() > 1 || self_loop)
        witnesses_.insert(witnesses_.end(), component.begin(), component.end());
    }
  }
  std::sort(witnesses_.begin(), witnesses_.end());
}

DepGraph build_dep_graph(const model::Workbook& wb) {
  DepGraph g;
  std::vector<std::pair<model::CellAddress, std::set<model::CellAddress>>> formulas;
  std::set<model::CellAddress> all;
  for (const auto& sheet : wb.sheets()) {
    for (const auto& [pos, cell] : sheet.cells()) {
      model::CellAddress addr{sheet.name(), pos.col, pos.row};
      all.insert(addr);
      if (cell.is_formula()) {
        std::set<model::CellAddress> refs;
        for (const auto& r : references(*cell.formula().ast, sheet.name())) refs.insert(wb.canonical(r));
        all.insert(refs.begin(), refs.end());
        formulas.emplace_back(std::move(addr), std::move(refs));
      }
    }
  }
  g.nodes_.assign(all.begin(), all.end());
  for (DepGraph::NodeId i = 0; i < g.nodes_.size(); ++i) g.index_.emplace(g.nodes_[i], i);
  g.dependents_.resize(g.nodes_.size());
  g.precedents_.resize(g.nodes_.size());
  for (const auto& [addr, refs] : formulas) {
    auto d = g.index_.at(addr);
    for (const auto& r : refs) {
      auto p = g.index_.at(r);
      g.dependents_[p].push_back(d);
      g.precedents_[d].push_back(p);
      ++g.edges_;
    }
  }
  for (auto& v : g.dependents_) std::sort(v.begin(), v.end());
  g.finalize();
  return g;
}

}  // namespace discom::engine
