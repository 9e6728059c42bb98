#include <algorithm>
#include <cmath>

#include "ghostlink/error.hpp"
#include "ghostlink/kernels.hpp"
#include "ghostlink/network.hpp"

namespace ghostlink::network {

namespace {

// Scales x to unit L2 norm; returns false if x is all zeros.
bool normalize(std::vector<double>& x) {
  const auto& kt = kernels::active();
  const double norm = std::sqrt(kt.sum_squares(x.data(), x.size()));
  if (norm == 0.0) return false;
  kt.scale(x.data(), 1.0 / norm, x.size());
  return true;
}

}  // namespace

CentralityResult eigenvector_centrality(const InfluenceGraph& graph, PowerOptions options) {
  if (graph.edges.empty() || graph.num_nodes == 0) {
    throw InvalidArgument("eigenvector centrality needs a graph with edges");
  }
  const std::size_t n = graph.num_nodes;
  double max_weight = 0.0;
  for (const auto& e : graph.edges) max_weight = std::max(max_weight, e.weight);
  if (!(max_weight > 0.0)) throw InvalidArgument("graph weights must be positive");

  const auto& kt = kernels::active();
  std::vector<double> x(n, 1.0 / std::sqrt(static_cast<double>(n)));
  std::vector<double> next(n);
  CentralityResult result;
  for (std::uint32_t it = 1; it <= options.max_iter; ++it) {
    double mass = 0.0;
    for (double xi : x) mass += xi;
    std::fill(next.begin(), next.end(), options.teleport / static_cast<double>(n) * mass);
    for (const auto& e : graph.edges) next[e.src] += e.weight / max_weight * x[e.dst];
    if (!normalize(next)) throw Error("eigenvector iteration collapsed to zero");
    const double change = kt.l1_distance(next.data(), x.data(), n);
    x.swap(next);
    result.iterations = it;
    if (change < options.tol) {
      result.converged = true;
      break;
    }
  }
  result.scores = std::move(x);
  return result;
}

HitsResult hits(const InfluenceGraph& graph, PowerOptions options) {
  if (graph.edges.empty() || graph.num_nodes == 0) {
    throw InvalidArgument("HITS needs a graph with edges");
  }
  const std::size_t n = graph.num_nodes;
  const auto& kt = kernels::active();
  HitsResult r;
  r.hub.assign(n, 1.0 / std::sqrt(static_cast<double>(n)));
  r.authority.assign(n, 1.0 / std::sqrt(static_cast<double>(n)));
  std::vector<double> hub(n), auth(n);
  for (std::uint32_t it = 1; it <= options.max_iter; ++it) {
    std::fill(auth.begin(), auth.end(), 0.0);
    for (const auto& e : graph.edges) auth[e.dst] += e.weight * r.hub[e.src];
    if (!normalize(auth)) throw Error("HITS authority vector collapsed to zero");
    std::fill(hub.begin(), hub.end(), 0.0);
    for (const auto& e : graph.edges) hub[e.src] += e.weight * auth[e.dst];
    if (!normalize(hub)) throw Error("HITS hub vector collapsed to zero");
    const double change =
        kt.l1_distance(hub.data(), r.hub.data(), n) + kt.l1_distance(auth.data(), r.authority.data(), n);
    r.hub.swap(hub);
    r.authority.swap(auth);
    r.iterations = it;
    if (change < options.tol) {
      r.converged = true;
      break;
    }
  }
  return r;
}

}  // namespace ghostlink::network
