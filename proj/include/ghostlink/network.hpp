#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <span>
#include <unordered_map>
#include <vector>

#include "ghostlink/corpus.hpp"
#include "ghostlink/matrix.hpp"
#include "ghostlink/sampler.hpp"

namespace ghostlink::network {

struct PsiEntry {
  UserId influencer = 0;
  std::int32_t count = 0;
  double weight = 0.0;
};

/// Row-stochastic psi stored sparsely: explicit entries for influencers with
/// evidence, and the prior-only value for everyone else in the row.
struct InfluenceMatrix {
  std::size_t num_users = 0;
  double rho = 0.0;
  std::vector<std::vector<PsiEntry>> rows;  // sorted by influencer
  std::vector<double> row_default;

  double at(UserId u, UserId v) const;
  double row_sum(UserId u) const;
};

/// psi(u, v) = (n(u, v, s=1) + rho) / (sum_v n(u, v, s=1) + U rho).
InfluenceMatrix influence_matrix(const ModelState& state);
InfluenceMatrix influence_matrix(
    const std::vector<std::unordered_map<UserId, std::int32_t>>& copied, double rho);

struct Edge {
  UserId src = 0;  // influencer
  UserId dst = 0;  // influenced user
  double weight = 0.0;
  std::int32_t count = 0;
  bool operator==(const Edge&) const = default;
};

struct InfluenceGraph {
  std::size_t num_nodes = 0;
  std::vector<Edge> edges;
  double total_weight() const;
};

/// Edge v -> u is kept iff n(u, v, s=1) >= min_count and psi(u, v) > min_weight.
struct EdgeFilter {
  std::int32_t min_count = 1;
  double min_weight = 0.0;
  static constexpr std::int32_t kNever = std::numeric_limits<std::int32_t>::max();
};

InfluenceGraph build_graph(const InfluenceMatrix& psi, EdgeFilter filter = {});

/// Per user: observed, latent (uninfluenced) and as-influencer facet
/// preferences, each alpha-smoothed. Rows of U x K matrices.
struct FacetProfiles {
  Matrix<double> observed;
  Matrix<double> latent;
  Matrix<double> influencer;
};

FacetProfiles facet_profiles(const ModelState& state);

/// Base-2 Jensen-Shannon divergence in [0, 1]. Throws InvalidArgument when an
/// input is not a distribution (sum off by more than 1e-6, negative entry) or
/// the sizes differ.
double jsd(std::span<const double> p, std::span<const double> q);

struct Divergences {
  double observed_vs_latent = 0.0;     // C1
  double latent_vs_influencer = 0.0;   // C2
  double observed_vs_influencer = 0.0; // C3
};

Divergences mean_divergences(const FacetProfiles& profiles);

struct ForestReport {
  std::vector<Edge> edges;
  double forest_mass = 0.0;
  double graph_mass = 0.0;
  std::size_t forest_edge_count = 0;
  std::size_t graph_edge_count = 0;
  double edge_fraction = 0.0;
  double mass_fraction = 0.0;
};

/// Maximum-weight spanning forest of the undirected projection (antiparallel
/// edges merged by max weight), built greedily with a disjoint-set forest.
ForestReport mwsf(const InfluenceGraph& graph);

/// Directed alternative: maximum-weight branching (every node keeps at most
/// one incoming edge, no directed cycles), via Chu-Liu/Edmonds contraction.
ForestReport max_branching(const InfluenceGraph& graph);

struct PowerOptions {
  double tol = 1e-8;
  std::uint32_t max_iter = 1000;
  double teleport = 1e-3;
};

struct CentralityResult {
  std::vector<double> scores;
  std::uint32_t iterations = 0;
  bool converged = false;
};

/// Power iteration on x <- (A + teleport/n J) x with A(v, u) = w(v -> u) / max w,
/// so a node scores by the scores of the users it influences. L2-normalized.
/// Throws InvalidArgument on a graph without edges.
CentralityResult eigenvector_centrality(const InfluenceGraph& graph, PowerOptions options = {});

struct HitsResult {
  std::vector<double> hub;
  std::vector<double> authority;
  std::uint32_t iterations = 0;
  bool converged = false;
};

/// Weighted HITS: authority(u) = sum_{v->u} w hub(v), hub(v) = sum_{v->u} w
/// authority(u), each L2-normalized per step. The teleport option is unused.
HitsResult hits(const InfluenceGraph& graph, PowerOptions options = {});

struct DegreeStats {
  std::vector<double> in;   // weighted in-degree per node
  std::vector<double> out;  // weighted out-degree per node
};

DegreeStats degree_stats(const InfluenceGraph& graph);

/// Exact value -> node count distribution.
std::map<double, std::size_t> value_counts(std::span<const double> values);

struct LogHistogram {
  std::size_t zeros = 0;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<std::size_t> counts;
};

/// Log-spaced bins from the smallest to the largest positive value.
LogHistogram log_histogram(std::span<const double> values, std::size_t bins_per_decade = 5);
void write_histogram_csv(const LogHistogram& hist, const std::filesystem::path& path);

/// Edge v -> u weighted by the number of items where u reviewed strictly after
/// v; kept iff that number is at least min_follow.
InfluenceGraph coreview_graph(const Corpus& corpus, std::int32_t min_follow = 5);

/// Throws InvalidArgument on size mismatch, fewer than 2 points or zero variance.
double pearson(std::span<const double> a, std::span<const double> b);

/// Influenced token mass per (facet, influencer, influenced user).
struct FacetEdge {
  std::uint32_t facet = 0;
  UserId src = 0;
  UserId dst = 0;
  std::int64_t count = 0;
};
std::vector<FacetEdge> facet_edges(const ModelState& state);

void write_edges_tsv(const InfluenceGraph& graph, const NameTable& users,
                     const std::filesystem::path& path);
void write_profiles_tsv(const FacetProfiles& profiles, const NameTable& users,
                        const std::filesystem::path& path);

}  // namespace ghostlink::network
