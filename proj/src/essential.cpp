// Compelled-edge labelling of a DAG (Chickering's Order-Edges / Find-Compelled).

#include <algorithm>
#include <map>

#include "orderspn/error.hpp"
#include "orderspn/model.hpp"

namespace orderspn {
namespace {

enum class Label { kUnknown, kCompelled, kReversible };

}  // namespace

PartiallyDirectedGraph essential_graph(const Dag& dag) {
  const int d = dag.d();
  const auto topo = dag.topological_order();
  if (!topo) throw ConfigError("essential_graph: graph is cyclic");
  std::vector<int> rank(d);
  for (int r = 0; r < d; ++r) rank[(*topo)[r]] = r;

  // Edge order: children ascending by rank, and for each child its parents descending by rank.
  std::vector<std::pair<int, int>> ordered;
  for (int y : *topo) {
    auto parents = dag.parents(y).members();
    std::sort(parents.begin(), parents.end(), [&](int a, int b) { return rank[a] > rank[b]; });
    for (int x : parents) ordered.emplace_back(x, y);
  }

  std::map<std::pair<int, int>, Label> label;
  for (const auto& e : ordered) label[e] = Label::kUnknown;

  auto label_into = [&](int y, Label value, bool only_unknown) {
    for (int p : dag.parents(y).members()) {
      Label& l = label[{p, y}];
      if (!only_unknown || l == Label::kUnknown) l = value;
    }
  };

  for (const auto& edge : ordered) {
    if (label[edge] != Label::kUnknown) continue;
    const auto [x, y] = edge;
    bool done = false;
    for (int w : dag.parents(x).members()) {
      if (label[{w, x}] != Label::kCompelled) continue;
      if (!dag.parents(y).contains(w)) {
        label_into(y, Label::kCompelled, false);
        done = true;
        break;
      }
      label[{w, y}] = Label::kCompelled;
    }
    if (done) continue;
    bool compelled = false;
    for (int z : dag.parents(y).members()) {
      if (z != x && !dag.parents(x).contains(z)) {
        compelled = true;
        break;
      }
    }
    label[edge] = compelled ? Label::kCompelled : Label::kReversible;
    label_into(y, compelled ? Label::kCompelled : Label::kReversible, true);
  }

  PartiallyDirectedGraph out(d);
  for (const auto& [e, l] : label) {
    if (l == Label::kCompelled)
      out.set_directed(e.first, e.second);
    else
      out.set_undirected(e.first, e.second);
  }
  return out;
}

}  // namespace orderspn
