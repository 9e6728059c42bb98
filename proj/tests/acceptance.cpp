// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails. `ghostlink_acceptance 3 5` runs a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ghostlink/network.hpp"
#include "ghostlink/recommend.hpp"
#include "ghostlink/sampler.hpp"
#include "ghostlink/synth.hpp"

using namespace ghostlink;
namespace net = ghostlink::network;
namespace rec = ghostlink::recommend;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

unsigned worker_threads() { return std::max(1u, std::min(8u, std::thread::hardware_concurrency())); }

std::shared_ptr<const Corpus> share(Corpus c) { return std::make_shared<const Corpus>(std::move(c)); }

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// Worked example with hand-assigned facets and influence flags.
Verdict worked_example() {
  Vocabulary vocab;
  for (const char* w : {"action", "non-linear", "narrative", "thriller"}) vocab.add(w);
  NameTable users, items;
  for (const char* u : {"Adam", "Bob", "Sam"}) users.intern(u);
  items.intern("movie");
  std::vector<Review> reviews = {{0, 0, 0, 0, 4.0, {0, 1, 2}, {}},
                                 {1, 1, 0, 1, 4.0, {0, 1}, {}},
                                 {2, 2, 0, 2, 4.0, {1, 3}, {}}};
  auto corpus = share(Corpus::build(std::move(vocab), std::move(users), std::move(items), std::move(reviews)));
  ModelState state(corpus, HyperParams::defaults(2, 3), Mode::ghostlink, Granularity::per_token, 1);
  state.assign({0, 0, 0, 0, 1, 1, 0}, {-1, -1, -1, -1, 0, 0, -1}, {0, 1, 1, 0, 1, 1, 1});
  auto bob = unsmoothed_influence_weights(state, 4);
  auto sam = unsmoothed_influence_weights(state, 5);
  auto near = [](double a, double b) { return std::fabs(a - b) <= 1e-12; };
  const bool ok = near(bob.p0, 0.0) && bob.p1.size() == 1 && bob.p1[0].first == 0 &&
                  near(bob.p1[0].second, 1.0 / 3) && bob.best == 0 && near(sam.p0, 0.5) &&
                  sam.p1.size() == 2 && near(sam.p1[0].second, 1.0 / 3) && near(sam.p1[1].second, 0.25) &&
                  sam.best == 0;
  std::ostringstream d;
  d << "Bob p0=" << bob.p0 << " p1(Adam)=" << (bob.p1.empty() ? -1 : bob.p1[0].second) << "; Sam p0=" << sam.p0
    << " p1=(" << (sam.p1.size() > 0 ? sam.p1[0].second : -1) << ", " << (sam.p1.size() > 1 ? sam.p1[1].second : -1)
    << ") best=" << sam.best;
  return {ok, d.str()};
}

Verdict count_conservation() {
  synth::ScenarioConfig c;
  c.num_users = 60;
  c.num_items = 100;
  c.num_leaders = 10;
  c.mean_length = 25;
  auto sc = synth::make_scenario(c, 11);
  auto g = synth::generate(sc.params, sc.schedule, 12);
  auto corpus = share(std::move(g.corpus));
  ModelState state(corpus, HyperParams::defaults(5, corpus->num_users()), Mode::ghostlink,
                   Granularity::per_token, 3);
  bool ok = true;
  for (int it = 0; it < 10 && ok; ++it) {
    state.sweep();
    ok = state.tabulate() == state.counts();
    const auto& t = state.counts();
    for (std::size_t u = 0; u < t.num_users && ok; ++u) {
      std::int64_t sum = 0;
      for (const auto& [v, n] : t.user_influencer[u]) sum += n;
      ok = sum == t.user_influence(u, 1);
    }
  }
  return {ok, std::to_string(corpus->num_reviews()) + " reviews, 10 sweeps"};
}

std::shared_ptr<const Corpus> likelihood_corpus() {
  synth::ScenarioConfig c;  // U=100, I=200, K=5, mean pi 0.4
  c.mean_length = 100;
  auto sc = synth::make_scenario(c, 21);
  return share(synth::generate(sc.params, sc.schedule, 22).corpus);
}

Verdict likelihood_behavior() {
  auto corpus = likelihood_corpus();
  SamplerConfig cfg;
  cfg.max_iters = 20;
  cfg.rel_ll_tol = 0.0;
  cfg.seed = 5;
  cfg.threads = worker_threads();
  const HyperParams h = HyperParams::defaults(5, corpus->num_users());
  auto gl = run(corpus, h, cfg);
  cfg.mode = Mode::author_topic;
  auto at = run(corpus, h, cfg);
  const auto& tr = gl.ll_trace;
  std::vector<double> deltas;
  for (std::size_t t = 1; t <= 10; ++t) deltas.push_back(tr[t] - tr[t - 1]);
  std::nth_element(deltas.begin(), deltas.begin() + 5, deltas.end());
  const double hi = deltas[5];
  std::nth_element(deltas.begin(), deltas.begin() + 4, deltas.end());
  const double median = 0.5 * (deltas[4] + hi);
  const double rel = std::fabs(tr[20] - tr[19]) / std::fabs(tr[19]);
  const bool ok = median > 0.0 && rel < 0.01 && tr.back() > at.ll_trace.back();
  std::ostringstream d;
  d << corpus->num_tokens() << " tokens; median dLL(1-10)=" << median << "; rel change at 20=" << rel
    << "; LL ghostlink=" << tr.back() << " author_topic=" << at.ll_trace.back();
  return {ok, d.str()};
}

Verdict influence_recovery() {
  double total = 0.0;
  std::ostringstream d;
  for (std::uint64_t seed : {101, 202, 303}) {
    synth::ScenarioConfig c;
    auto sc = synth::make_scenario(c, seed);
    auto g = synth::generate(sc.params, sc.schedule, seed + 1);
    const std::size_t U = c.num_users;
    std::vector<std::int64_t> influenced(U, 0);
    for (ReviewId r = 0; r < g.corpus.num_reviews(); ++r) {
      for (auto s : g.truth.s[r]) influenced[g.corpus.review(r).user] += s;
    }
    auto corpus = share(std::move(g.corpus));
    SamplerConfig cfg;
    cfg.max_iters = 60;
    cfg.seed = seed;
    cfg.threads = worker_threads();
    auto res = run(corpus, HyperParams::defaults(c.num_facets, U), cfg);
    auto psi = net::influence_matrix(res.state);
    std::size_t eligible = 0, hits = 0;
    for (UserId u = 0; u < U; ++u) {
      if (influenced[u] < 50 || sc.planted_influencer[u] < 0) continue;
      ++eligible;
      const auto& row = psi.rows[u];
      auto best = std::max_element(row.begin(), row.end(), [&](const auto& a, const auto& b) {
        const double wa = a.influencer == u ? -1.0 : a.weight;
        const double wb = b.influencer == u ? -1.0 : b.weight;
        return wa < wb;
      });
      if (best != row.end() && static_cast<std::int32_t>(best->influencer) == sc.planted_influencer[u]) ++hits;
    }
    const double frac = eligible ? static_cast<double>(hits) / eligible : 0.0;
    total += frac;
    d << "seed " << seed << ": " << hits << "/" << eligible << "; ";
  }
  const double mean = total / 3.0;
  d << "mean " << mean;
  return {mean >= 0.7, d.str()};
}

double brute_forest(const net::InfluenceGraph& g) {
  std::vector<std::tuple<UserId, UserId, double>> und;
  for (const auto& e : g.edges) {
    const UserId a = std::min(e.src, e.dst), b = std::max(e.src, e.dst);
    auto it = std::find_if(und.begin(), und.end(),
                           [&](const auto& t) { return std::get<0>(t) == a && std::get<1>(t) == b; });
    if (it == und.end()) und.emplace_back(a, b, e.weight);
    else std::get<2>(*it) = std::max(std::get<2>(*it), e.weight);
  }
  double best = 0.0;
  for (std::uint32_t mask = 0; mask < (1u << und.size()); ++mask) {
    std::vector<UserId> parent(g.num_nodes);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](UserId x) {
      while (parent[x] != x) x = parent[x];
      return x;
    };
    bool ok = true;
    double total = 0.0;
    for (std::size_t k = 0; k < und.size() && ok; ++k) {
      if (!(mask >> k & 1u)) continue;
      const UserId ra = find(std::get<0>(und[k])), rb = find(std::get<1>(und[k]));
      ok = ra != rb;
      parent[ra] = rb;
      total += std::get<2>(und[k]);
    }
    if (ok) best = std::max(best, total);
  }
  return best;
}

std::vector<double> unit(std::vector<double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  for (double& v : x) v /= std::sqrt(s);
  return x;
}

Verdict oracle_equivalence() {
  std::mt19937 gen(2024);
  std::size_t forest_ok = 0;
  for (int trial = 0; trial < 200; ++trial) {
    net::InfluenceGraph g;
    g.num_nodes = 2 + gen() % 7;
    const std::size_t m = gen() % 13;
    for (std::size_t e = 0; e < m; ++e) {
      const UserId a = gen() % g.num_nodes, b = gen() % g.num_nodes;
      if (a == b) continue;
      if (std::any_of(g.edges.begin(), g.edges.end(), [&](const auto& x) { return x.src == a && x.dst == b; }))
        continue;
      g.edges.push_back({a, b, (1 + gen() % 64) / 32.0, 1});
    }
    forest_ok += net::mwsf(g).forest_mass == brute_forest(g);
  }

  double power_err = 0.0;
  for (std::uint32_t seed = 0; seed < 5; ++seed) {
    std::mt19937 pg(seed);
    std::uniform_real_distribution<double> w(0.1, 2.0);
    net::InfluenceGraph g;
    g.num_nodes = 10;
    for (UserId i = 0; i < 10; ++i) g.edges.push_back({i, static_cast<UserId>((i + 1) % 10), w(pg), 1});
    for (int k = 0; k < 20; ++k) {
      const UserId a = pg() % 10, b = pg() % 10;
      if (a != b) g.edges.push_back({a, b, w(pg), 1});
    }
    net::PowerOptions opt;
    opt.tol = 1e-13;
    opt.max_iter = 100000;
    const std::size_t n = 10;
    double maxw = 0.0;
    std::vector<std::vector<double>> W(n, std::vector<double>(n, 0.0));
    for (const auto& e : g.edges) {
      W[e.src][e.dst] += e.weight;
      maxw = std::max(maxw, e.weight);
    }
    std::vector<double> x(n, 1.0), hub(n, 1.0), auth(n, 1.0);
    for (int it = 0; it < 20000; ++it) {
      std::vector<double> y(n, 0.0), a(n, 0.0), h(n, 0.0);
      double sx = std::accumulate(x.begin(), x.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        y[i] = opt.teleport / n * sx;
        for (std::size_t j = 0; j < n; ++j) y[i] += W[i][j] / maxw * x[j];
      }
      x = unit(y);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a[j] += W[i][j] * hub[i];
      auth = unit(a);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) h[i] += W[i][j] * auth[j];
      hub = unit(h);
    }
    auto ev = net::eigenvector_centrality(g, opt);
    auto ht = net::hits(g, opt);
    for (std::size_t i = 0; i < n; ++i) {
      power_err = std::max({power_err, std::fabs(ev.scores[i] - x[i]), std::fabs(ht.hub[i] - hub[i]),
                            std::fabs(ht.authority[i] - auth[i])});
    }
  }

  std::uniform_real_distribution<double> u(0.0, 1.0);
  double jsd_err = 0.0;
  bool jsd_props = true;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t K = 2 + trial % 15;
    std::vector<double> p(K), q(K);
    double sp = 0, sq = 0;
    for (std::size_t k = 0; k < K; ++k) {
      p[k] = u(gen);
      q[k] = (trial % 10 == 0 && k % 2 == 0) ? 0.0 : u(gen);
      sp += p[k];
      sq += q[k];
    }
    if (sq == 0.0) q[0] = sq = 1.0;
    for (std::size_t k = 0; k < K; ++k) p[k] /= sp, q[k] /= sq;
    long double ref = 0;
    for (std::size_t k = 0; k < K; ++k) {
      const long double m = 0.5L * (p[k] + q[k]);
      if (p[k] > 0) ref += 0.5L * p[k] * std::log2(p[k] / m);
      if (q[k] > 0) ref += 0.5L * q[k] * std::log2(q[k] / m);
    }
    const double d = net::jsd(p, q);
    jsd_err = std::max(jsd_err, std::fabs(d - static_cast<double>(ref)));
    jsd_props = jsd_props && d == net::jsd(q, p) && d >= 0.0 && d <= 1.0 && net::jsd(p, p) == 0.0;
  }
  const bool ok = forest_ok == 200 && power_err <= 1e-6 && jsd_err <= 1e-12 && jsd_props;
  std::ostringstream d;
  d << "mwsf " << forest_ok << "/200 exact; max power-iteration error " << power_err << "; max jsd error "
    << jsd_err << (jsd_props ? "" : "; jsd property violated");
  return {ok, d.str()};
}

Verdict fast_mode() {
  // All-distinct reviews: every review draws its words without replacement.
  std::mt19937 gen(8);
  Vocabulary vocab;
  for (int w = 0; w < 150; ++w) vocab.add("w" + std::to_string(w));
  NameTable users, items;
  for (int u = 0; u < 40; ++u) users.intern("u" + std::to_string(u));
  for (int i = 0; i < 60; ++i) items.intern("i" + std::to_string(i));
  std::vector<Review> reviews;
  std::vector<WordId> pool(150);
  std::iota(pool.begin(), pool.end(), 0);
  for (ItemId i = 0; i < 60; ++i) {
    std::set<UserId> seen;
    for (int k = 0; k < 6; ++k) {
      const UserId u = gen() % 40;
      if (!seen.insert(u).second) continue;
      std::shuffle(pool.begin(), pool.end(), gen);
      Review r;
      r.id = static_cast<ReviewId>(reviews.size());
      r.user = u;
      r.item = i;
      r.timestamp = k;
      r.rating = 3.0;
      r.tokens.assign(pool.begin(), pool.begin() + 5 + gen() % 20);
      reviews.push_back(std::move(r));
    }
  }
  auto distinct = share(Corpus::build(std::move(vocab), std::move(users), std::move(items), std::move(reviews)));
  SamplerConfig cfg;
  cfg.max_iters = 15;
  cfg.rel_ll_tol = 0.0;
  cfg.seed = 4;
  const HyperParams h = HyperParams::defaults(5, distinct->num_users());
  auto a = run(distinct, h, cfg);
  cfg.granularity = Granularity::per_unique_token;
  auto b = run(distinct, h, cfg);
  const bool identical = a.state.counts() == b.state.counts();

  // Duplication-heavy corpus: small, peaked vocabulary and long reviews.
  synth::ScenarioConfig c;
  c.num_users = 60;
  c.num_items = 80;
  c.num_leaders = 10;
  c.vocab_size = 40;
  c.beta_gamma = 0.02;
  c.mean_length = 200;
  auto sc = synth::make_scenario(c, 31);
  auto heavy = share(synth::generate(sc.params, sc.schedule, 32).corpus);
  std::size_t unique = 0;
  for (const auto& r : heavy->reviews()) unique += r.unique_tokens.size();
  const double multiplicity = static_cast<double>(heavy->num_tokens()) / unique;
  auto timed = [&](Granularity g) {
    SamplerConfig t;
    t.max_iters = 10;
    t.rel_ll_tol = 0.0;
    t.seed = 6;
    t.granularity = g;
    const HyperParams hh = HyperParams::defaults(5, heavy->num_users());
    double best = 1e300;
    for (int rep = 0; rep < 2; ++rep) {
      const auto start = std::chrono::steady_clock::now();
      run(heavy, hh, t);
      best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    }
    return best;
  };
  const double per_token = timed(Granularity::per_token);
  const double per_unique = timed(Granularity::per_unique_token);
  const double ratio = per_unique / per_token;
  const bool ok = identical && multiplicity >= 3.0 && ratio <= 0.7;
  std::ostringstream d;
  d << "distinct-token tables " << (identical ? "identical" : "differ") << "; multiplicity " << multiplicity
    << "; time ratio " << ratio << " (" << per_unique << "s / " << per_token << "s)";
  return {ok, d.str()};
}

Verdict prediction_ordering() {
  // Leaders are never influenced and rate from their own level plus the
  // sentiment of the facets they write about; followers copy the rating of
  // their influencer plus N(0, 0.1).
  synth::ScenarioConfig c;
  c.num_items = 800;
  c.vocab_size = 100;
  c.mean_length = 60;
  c.pi_mean = 0.5;
  c.leader_pi = 0.0;
  auto sc = synth::make_scenario(c, 41);
  synth::RatingModel ratings;
  ratings.sentiment_weight = 2.0;
  auto corpus = share(synth::generate(sc.params, sc.schedule, 42, ratings).corpus);
  SamplerConfig cfg;
  cfg.max_iters = 40;
  cfg.seed = 43;
  cfg.threads = worker_threads();
  auto res = run(corpus, HyperParams::defaults(c.num_facets, corpus->num_users()), cfg);
  auto cache = rec::build_cache(res.state, worker_threads());
  rec::CvOptions opt;
  opt.folds = 10;
  opt.seed = 44;
  opt.threads = worker_threads();
  const double f2 = rec::cross_validate(*corpus, cache, rec::kF2, opt).mean_mse;
  const double f23 = rec::cross_validate(*corpus, cache, rec::kF2 | rec::kF3, opt).mean_mse;
  const double f123 = rec::cross_validate(*corpus, cache, rec::kF1 | rec::kF2 | rec::kF3, opt).mean_mse;
  std::ostringstream d;
  d << "MSE F2=" << f2 << " F2+F3=" << f23 << " F1+F2+F3=" << f123;
  return {f23 < f2 && f123 <= f23, d.str()};
}

Verdict degenerate_mode() {
  synth::ScenarioConfig c;
  c.num_users = 50;
  c.num_items = 80;
  c.num_leaders = 10;
  c.mean_length = 30;
  auto sc = synth::make_scenario(c, 51);
  auto corpus = share(synth::generate(sc.params, sc.schedule, 52).corpus);
  SamplerConfig cfg;
  cfg.max_iters = 10;
  cfg.mode = Mode::author_topic;
  auto res = run(corpus, HyperParams::defaults(5, corpus->num_users()), cfg);
  const double c1 = net::mean_divergences(net::facet_profiles(res.state)).observed_vs_latent;
  auto psi = net::influence_matrix(res.state);
  std::vector<ReviewId> all(corpus->num_reviews());
  std::iota(all.begin(), all.end(), 0);
  auto bias = rec::f2_statistics(*corpus, all);
  std::size_t mismatches = 0;
  for (ReviewId d = 0; d < corpus->num_reviews(); ++d) {
    mismatches += rec::f3_features(res.state, psi, bias, d).gamma_dc != bias.user_bias(corpus->review(d).user);
  }
  return {c1 == 0.0 && mismatches == 0,
          "C1=" + fmt("%g", c1) + "; gamma_dc mismatches " + std::to_string(mismatches) + " of " +
              std::to_string(corpus->num_reviews())};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"worked example parity", worked_example},
      {"count conservation", count_conservation},
      {"likelihood behavior", likelihood_behavior},
      {"influence recovery", influence_recovery},
      {"oracle equivalence", oracle_equivalence},
      {"fast-mode soundness", fast_mode},
      {"prediction ordering", prediction_ordering},
      {"degenerate-mode identities", degenerate_mode},
  };
  std::set<int> only;
  for (int a = 1; a < argc; ++a) only.insert(std::atoi(argv[a]));
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[k].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %d (%s): %s [%s] (%.1fs)\n", id, criteria[k].first, v.pass ? "PASS" : "FAIL",
                v.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !v.pass;
  }
  return failed == 0 ? 0 : 1;
}
