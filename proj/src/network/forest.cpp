#include <algorithm>
#include <map>
#include <numeric>

#include "ghostlink/network.hpp"

namespace ghostlink::network {

namespace {

class DisjointSet {
 public:
  explicit DisjointSet(std::size_t n) : parent_(n), rank_(n, 0) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<int> rank_;
};

void finish(ForestReport& r, const InfluenceGraph& graph) {
  r.graph_mass = graph.total_weight();
  r.graph_edge_count = graph.edges.size();
  r.forest_edge_count = r.edges.size();
  r.forest_mass = 0.0;
  for (const auto& e : r.edges) r.forest_mass += e.weight;
  r.edge_fraction = r.graph_edge_count == 0
                        ? 0.0
                        : static_cast<double>(r.forest_edge_count) / r.graph_edge_count;
  r.mass_fraction = r.graph_mass > 0.0 ? r.forest_mass / r.graph_mass : 0.0;
}

struct WeightedArc {
  std::size_t from;
  std::size_t to;
  double weight;
};

// Maximum spanning arborescence towards every node from `root`, recursive
// Chu-Liu/Edmonds. Every non-root node must have an incoming arc. Returns
// indices into `arcs`.
std::vector<std::size_t> max_arborescence(std::size_t n, std::size_t root,
                                          const std::vector<WeightedArc>& arcs) {
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> best_in(n, kNone);
  for (std::size_t i = 0; i < arcs.size(); ++i) {
    const auto& a = arcs[i];
    if (a.to == root || a.from == a.to) continue;
    if (best_in[a.to] == kNone || a.weight > arcs[best_in[a.to]].weight) best_in[a.to] = i;
  }

  std::vector<std::size_t> comp(n, kNone);
  std::vector<std::size_t> visit(n, kNone);
  std::size_t cycles = 0;
  for (std::size_t v = 0; v < n; ++v) {
    std::size_t x = v;
    while (x != root && visit[x] == kNone && comp[x] == kNone) {
      visit[x] = v;
      x = arcs[best_in[x]].from;
    }
    if (x != root && comp[x] == kNone && visit[x] == v) {
      std::size_t y = x;
      do {
        comp[y] = cycles;
        y = arcs[best_in[y]].from;
      } while (y != x);
      ++cycles;
    }
  }

  if (cycles == 0) {
    std::vector<std::size_t> chosen;
    for (std::size_t v = 0; v < n; ++v) {
      if (v != root) chosen.push_back(best_in[v]);
    }
    return chosen;
  }

  std::size_t next_id = cycles;
  for (auto& c : comp) {
    if (c == kNone) c = next_id++;
  }
  std::vector<WeightedArc> contracted;
  std::vector<std::size_t> origin;
  for (std::size_t i = 0; i < arcs.size(); ++i) {
    const auto& a = arcs[i];
    if (comp[a.from] == comp[a.to] || a.to == root) continue;
    contracted.push_back({comp[a.from], comp[a.to], a.weight - arcs[best_in[a.to]].weight});
    origin.push_back(i);
  }
  auto sub = max_arborescence(next_id, comp[root], contracted);

  std::vector<std::size_t> chosen;
  std::vector<bool> entered(n, false);
  for (std::size_t j : sub) {
    const std::size_t i = origin[j];
    chosen.push_back(i);
    entered[arcs[i].to] = true;
  }
  for (std::size_t v = 0; v < n; ++v) {
    if (v != root && comp[v] < cycles && !entered[v]) chosen.push_back(best_in[v]);
  }
  return chosen;
}

}  // namespace

ForestReport mwsf(const InfluenceGraph& graph) {
  // Undirected projection: keep the heavier of antiparallel edges.
  std::map<std::pair<UserId, UserId>, Edge> projected;
  for (const auto& e : graph.edges) {
    if (e.src == e.dst) continue;
    auto key = std::minmax(e.src, e.dst);
    auto [it, inserted] = projected.try_emplace({key.first, key.second}, e);
    if (!inserted && e.weight > it->second.weight) it->second = e;
  }
  std::vector<std::pair<std::pair<UserId, UserId>, Edge>> order(projected.begin(), projected.end());
  std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    return a.second.weight > b.second.weight;
  });

  ForestReport report;
  DisjointSet dsu(graph.num_nodes);
  for (const auto& [key, e] : order) {
    if (dsu.unite(key.first, key.second)) report.edges.push_back(e);
  }
  finish(report, graph);
  return report;
}

ForestReport max_branching(const InfluenceGraph& graph) {
  const std::size_t n = graph.num_nodes;
  const std::size_t root = n;
  std::vector<WeightedArc> arcs;
  std::vector<std::size_t> edge_of;
  for (std::size_t i = 0; i < graph.edges.size(); ++i) {
    const auto& e = graph.edges[i];
    if (e.src == e.dst || e.weight <= 0.0) continue;
    arcs.push_back({e.src, e.dst, e.weight});
    edge_of.push_back(i);
  }
  // Zero-weight arcs from a virtual root turn "branching" into "arborescence".
  const std::size_t real_arcs = arcs.size();
  for (std::size_t v = 0; v < n; ++v) arcs.push_back({root, v, 0.0});

  ForestReport report;
  for (std::size_t i : max_arborescence(n + 1, root, arcs)) {
    if (i < real_arcs) report.edges.push_back(graph.edges[edge_of[i]]);
  }
  finish(report, graph);
  return report;
}

}  // namespace ghostlink::network
