#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <unordered_set>

#include "ghostlink/error.hpp"
#include "ghostlink/network.hpp"

namespace ghostlink::network {

double InfluenceMatrix::at(UserId u, UserId v) const {
  const auto& row = rows.at(u);
  auto it = std::lower_bound(row.begin(), row.end(), v,
                             [](const PsiEntry& e, UserId key) { return e.influencer < key; });
  if (it != row.end() && it->influencer == v) return it->weight;
  return row_default.at(u);
}

double InfluenceMatrix::row_sum(UserId u) const {
  const auto& row = rows.at(u);
  double total = row_default.at(u) * static_cast<double>(num_users - row.size());
  for (const auto& e : row) total += e.weight;
  return total;
}

InfluenceMatrix influence_matrix(
    const std::vector<std::unordered_map<UserId, std::int32_t>>& copied, double rho) {
  InfluenceMatrix psi;
  psi.num_users = copied.size();
  psi.rho = rho;
  psi.rows.resize(copied.size());
  psi.row_default.resize(copied.size());
  const double U = static_cast<double>(copied.size());
  for (std::size_t u = 0; u < copied.size(); ++u) {
    std::int64_t total = 0;
    for (const auto& [v, n] : copied[u]) total += n;
    const double denom = static_cast<double>(total) + U * rho;
    psi.row_default[u] = rho / denom;
    auto& row = psi.rows[u];
    for (const auto& [v, n] : copied[u]) {
      if (n > 0) row.push_back({v, n, (n + rho) / denom});
    }
    std::sort(row.begin(), row.end(),
              [](const PsiEntry& a, const PsiEntry& b) { return a.influencer < b.influencer; });
  }
  return psi;
}

InfluenceMatrix influence_matrix(const ModelState& state) {
  return influence_matrix(state.counts().user_influencer, state.hyper().rho);
}

double InfluenceGraph::total_weight() const {
  double total = 0.0;
  for (const auto& e : edges) total += e.weight;
  return total;
}

InfluenceGraph build_graph(const InfluenceMatrix& psi, EdgeFilter filter) {
  InfluenceGraph g;
  g.num_nodes = psi.num_users;
  for (std::size_t u = 0; u < psi.rows.size(); ++u) {
    for (const auto& e : psi.rows[u]) {
      if (e.influencer == u) continue;
      if (e.count < filter.min_count || !(e.weight > filter.min_weight) || e.weight <= 0.0) continue;
      g.edges.push_back({e.influencer, static_cast<UserId>(u), e.weight, e.count});
    }
  }
  return g;
}

namespace {

void smooth_rows(const Matrix<double>& counts, double alpha, Matrix<double>& out) {
  const std::size_t K = counts.cols();
  out = Matrix<double>(counts.rows(), K);
  for (std::size_t r = 0; r < counts.rows(); ++r) {
    double total = 0.0;
    for (double x : counts.row(r)) total += x;
    const double denom = total + static_cast<double>(K) * alpha;
    for (std::size_t k = 0; k < K; ++k) out(r, k) = (counts(r, k) + alpha) / denom;
  }
}

Matrix<double> to_double(const Matrix<std::int32_t>& m) {
  Matrix<double> out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.data().size(); ++i) out.data()[i] = m.data()[i];
  return out;
}

}  // namespace

FacetProfiles facet_profiles(const ModelState& state) {
  const CountTables& c = state.counts();
  const Corpus& corpus = state.corpus();
  Matrix<double> observed(c.num_users, c.num_facets);
  for (const Review& r : corpus.reviews()) {
    for (std::size_t k = 0; k < c.num_facets; ++k) observed(r.user, k) += c.review_facet(r.id, k);
  }
  FacetProfiles p;
  const double alpha = state.hyper().alpha;
  smooth_rows(observed, alpha, p.observed);
  smooth_rows(to_double(c.user_facet_latent), alpha, p.latent);
  smooth_rows(to_double(c.influencer_facet), alpha, p.influencer);
  return p;
}

double jsd(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size() || p.empty()) throw InvalidArgument("jsd inputs must have equal, nonzero size");
  auto check = [](std::span<const double> x) {
    double total = 0.0;
    for (double v : x) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument("jsd input has an invalid entry");
      total += v;
    }
    if (std::fabs(total - 1.0) > 1e-6) throw InvalidArgument("jsd input is not normalized");
  };
  check(p);
  check(q);
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    // a + b commutes exactly, so jsd(p, q) == jsd(q, p) bit for bit.
    const double a = p[i] > 0.0 ? 0.5 * p[i] * std::log2(p[i] / m) : 0.0;
    const double b = q[i] > 0.0 ? 0.5 * q[i] * std::log2(q[i] / m) : 0.0;
    total += a + b;
  }
  return std::clamp(total, 0.0, 1.0);
}

Divergences mean_divergences(const FacetProfiles& profiles) {
  const std::size_t U = profiles.observed.rows();
  if (U == 0) throw InvalidArgument("mean_divergences needs at least one user");
  Divergences d;
  for (std::size_t u = 0; u < U; ++u) {
    d.observed_vs_latent += jsd(profiles.observed.row(u), profiles.latent.row(u));
    d.latent_vs_influencer += jsd(profiles.latent.row(u), profiles.influencer.row(u));
    d.observed_vs_influencer += jsd(profiles.observed.row(u), profiles.influencer.row(u));
  }
  d.observed_vs_latent /= static_cast<double>(U);
  d.latent_vs_influencer /= static_cast<double>(U);
  d.observed_vs_influencer /= static_cast<double>(U);
  return d;
}

DegreeStats degree_stats(const InfluenceGraph& graph) {
  DegreeStats s;
  s.in.assign(graph.num_nodes, 0.0);
  s.out.assign(graph.num_nodes, 0.0);
  for (const auto& e : graph.edges) {
    s.out[e.src] += e.weight;
    s.in[e.dst] += e.weight;
  }
  return s;
}

std::map<double, std::size_t> value_counts(std::span<const double> values) {
  std::map<double, std::size_t> out;
  for (double v : values) ++out[v];
  return out;
}

LogHistogram log_histogram(std::span<const double> values, std::size_t bins_per_decade) {
  if (bins_per_decade == 0) throw InvalidArgument("bins_per_decade must be positive");
  LogHistogram h;
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (double v : values) {
    if (v <= 0.0) {
      ++h.zeros;
      continue;
    }
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi == 0.0) return h;
  const double step = 1.0 / static_cast<double>(bins_per_decade);
  const double start = std::floor(std::log10(lo) / step) * step;
  const auto bins = static_cast<std::size_t>(std::floor((std::log10(hi) - start) / step)) + 1;
  h.counts.assign(bins, 0);
  for (std::size_t b = 0; b < bins; ++b) {
    h.lower.push_back(std::pow(10.0, start + step * static_cast<double>(b)));
    h.upper.push_back(std::pow(10.0, start + step * static_cast<double>(b + 1)));
  }
  for (double v : values) {
    if (v <= 0.0) continue;
    auto b = static_cast<std::size_t>(std::floor((std::log10(v) - start) / step));
    h.counts[std::min(b, bins - 1)]++;
  }
  return h;
}

void write_histogram_csv(const LogHistogram& hist, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "lower,upper,count\n" << std::setprecision(10);
  out << "0,0," << hist.zeros << '\n';
  for (std::size_t b = 0; b < hist.counts.size(); ++b) {
    out << hist.lower[b] << ',' << hist.upper[b] << ',' << hist.counts[b] << '\n';
  }
}

InfluenceGraph coreview_graph(const Corpus& corpus, std::int32_t min_follow) {
  if (min_follow < 1) throw InvalidArgument("min_follow must be at least 1");
  std::unordered_map<std::uint64_t, std::int32_t> follows;
  std::unordered_set<std::uint64_t> seen;
  for (ItemId item = 0; item < corpus.num_items(); ++item) {
    auto list = corpus.item_reviews(item);
    seen.clear();
    for (std::size_t b = 0; b < list.size(); ++b) {
      const Review& later = corpus.review(list[b]);
      for (ReviewId earlier_id : corpus.influence_view(later.id)) {
        const UserId v = corpus.review(earlier_id).user;
        if (v == later.user) continue;
        seen.insert((static_cast<std::uint64_t>(v) << 32) | later.user);
      }
    }
    for (auto key : seen) ++follows[key];
  }
  InfluenceGraph g;
  g.num_nodes = corpus.num_users();
  for (const auto& [key, n] : follows) {
    if (n < min_follow) continue;
    g.edges.push_back({static_cast<UserId>(key >> 32), static_cast<UserId>(key & 0xffffffffu),
                       static_cast<double>(n), n});
  }
  std::sort(g.edges.begin(), g.edges.end(), [](const Edge& a, const Edge& b) {
    return a.src != b.src ? a.src < b.src : a.dst < b.dst;
  });
  return g;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidArgument("pearson inputs differ in length");
  if (a.size() < 2) throw InvalidArgument("pearson needs at least two points");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) throw InvalidArgument("pearson input has zero variance");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::vector<FacetEdge> facet_edges(const ModelState& state) {
  const Corpus& corpus = state.corpus();
  std::map<std::tuple<std::uint32_t, UserId, UserId>, std::int64_t> tally;
  for (std::size_t slot = 0; slot < state.num_slots(); ++slot) {
    if (state.s(slot) == 0) continue;
    const UserId dst = corpus.review(state.slot_review(slot)).user;
    const UserId src = corpus.review(static_cast<ReviewId>(state.v(slot))).user;
    tally[{state.z(slot), src, dst}] += state.slot_count(slot);
  }
  std::vector<FacetEdge> out;
  out.reserve(tally.size());
  for (const auto& [key, n] : tally) {
    out.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), n});
  }
  return out;
}

void write_edges_tsv(const InfluenceGraph& graph, const NameTable& users,
                     const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "src\tdst\tweight\n" << std::setprecision(17);
  for (const auto& e : graph.edges) {
    out << users.name(e.src) << '\t' << users.name(e.dst) << '\t' << e.weight << '\n';
  }
}

void write_profiles_tsv(const FacetProfiles& profiles, const NameTable& users,
                        const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  const std::size_t K = profiles.observed.cols();
  out << "user\tdistribution";
  for (std::size_t k = 0; k < K; ++k) out << "\tz" << k;
  out << '\n' << std::setprecision(17);
  auto emit = [&](const Matrix<double>& m, const char* label) {
    for (std::size_t u = 0; u < m.rows(); ++u) {
      out << users.name(static_cast<std::uint32_t>(u)) << '\t' << label;
      for (double x : m.row(u)) out << '\t' << x;
      out << '\n';
    }
  };
  emit(profiles.observed, "observed");
  emit(profiles.latent, "latent");
  emit(profiles.influencer, "influencer");
}

}  // namespace ghostlink::network
