#include "ghostlink/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <string>

#include "ghostlink/error.hpp"
#include "ghostlink/rng.hpp"
#include "json.hpp"

namespace ghostlink::synth {

namespace {

// log of a Gamma(shape, 1) draw. For small shapes the draw itself underflows,
// so use Gamma(a) = Gamma(a + 1) * U^(1/a) in log space.
double log_gamma_draw(Rng& rng, double shape) {
  if (shape >= 1.0) {
    std::gamma_distribution<double> g(shape, 1.0);
    return std::log(std::max(g(rng), std::numeric_limits<double>::min()));
  }
  std::gamma_distribution<double> g(shape + 1.0, 1.0);
  double u = uniform01(rng);
  while (u == 0.0) u = uniform01(rng);
  return std::log(std::max(g(rng), std::numeric_limits<double>::min())) + std::log(u) / shape;
}

void dirichlet_row(Rng& rng, double concentration, std::span<double> out) {
  double max_log = -std::numeric_limits<double>::infinity();
  for (double& x : out) {
    x = log_gamma_draw(rng, concentration);
    max_log = std::max(max_log, x);
  }
  double total = 0.0;
  for (double& x : out) {
    x = std::exp(x - max_log);
    total += x;
  }
  for (double& x : out) x /= total;
}

double beta_draw(Rng& rng, double a, double b) {
  double la = log_gamma_draw(rng, a);
  double lb = log_gamma_draw(rng, b);
  return 1.0 / (1.0 + std::exp(lb - la));
}

double normal_draw(Rng& rng, double sd) {
  double u1 = uniform01(rng);
  while (u1 == 0.0) u1 = uniform01(rng);
  double u2 = uniform01(rng);
  return sd * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::uint32_t length_draw(Rng& rng, std::uint32_t mean_length) {
  if (mean_length <= 1) return 1;
  std::poisson_distribution<std::uint32_t> p(static_cast<double>(mean_length - 1));
  return 1 + p(rng);
}

// Cumulative sums for inverse-CDF sampling.
std::vector<double> cumulative(std::span<const double> row) {
  std::vector<double> c(row.size());
  std::partial_sum(row.begin(), row.end(), c.begin());
  return c;
}

std::size_t draw_cumulative(Rng& rng, const std::vector<double>& cdf) {
  double target = uniform01(rng) * cdf.back();
  auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
  return std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
}

void remove_diagonal(Matrix<double>& psi) {
  for (std::size_t u = 0; u < psi.rows(); ++u) {
    psi(u, u) = 0.0;
    double total = 0.0;
    for (double x : psi.row(u)) total += x;
    if (total > 0.0) {
      for (double& x : psi.row(u)) x /= total;
    }
  }
}

void check_stochastic(const Matrix<double>& m, const char* name, bool allow_zero_rows) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double total = 0.0;
    for (double x : m.row(r)) {
      if (!(x >= 0.0)) throw InvalidArgument(std::string(name) + " has a negative entry");
      total += x;
    }
    if (allow_zero_rows && total == 0.0) continue;
    if (std::fabs(total - 1.0) > 1e-9) {
      throw InvalidArgument(std::string(name) + " row " + std::to_string(r) + " is not stochastic");
    }
  }
}

}  // namespace

void GroundTruthParams::validate() const {
  const std::size_t U = theta.rows();
  if (psi.rows() != U || psi.cols() != U || pi.size() != U) {
    throw InvalidArgument("ground truth dimensions disagree on user count");
  }
  if (beta.rows() != theta.cols()) throw InvalidArgument("beta rows must equal K");
  check_stochastic(theta, "theta", false);
  // A single user has nobody to be influenced by.
  check_stochastic(psi, "psi", U == 1);
  check_stochastic(beta, "beta", false);
  for (std::size_t u = 0; u < U; ++u) {
    if (psi(u, u) != 0.0) throw InvalidArgument("psi must have a zero diagonal");
    if (!(pi[u] >= 0.0 && pi[u] <= 1.0)) throw InvalidArgument("pi must lie in [0, 1]");
  }
}

GroundTruthParams sample_params(const HyperParams& hyper, std::size_t num_users,
                                std::size_t num_facets, std::size_t vocab_size,
                                std::uint64_t seed, SampleOptions options) {
  if (num_users < 1 || num_facets < 1 || vocab_size < 1) {
    throw InvalidArgument("U, K and W must all be at least 1");
  }
  HyperParams h = hyper;
  h.K = static_cast<std::uint32_t>(num_facets);
  h.validate();

  Rng rng(seed);
  GroundTruthParams p;
  p.theta = Matrix<double>(num_users, num_facets);
  p.psi = Matrix<double>(num_users, num_users);
  p.beta = Matrix<double>(num_facets, vocab_size);
  p.pi.resize(num_users);
  for (std::size_t u = 0; u < num_users; ++u) {
    if (options.uniform_theta) {
      std::fill(p.theta.row(u).begin(), p.theta.row(u).end(), 1.0 / num_facets);
    } else {
      dirichlet_row(rng, h.alpha, p.theta.row(u));
    }
    dirichlet_row(rng, h.rho, p.psi.row(u));
    p.pi[u] = beta_draw(rng, h.eta, h.eta);
  }
  remove_diagonal(p.psi);
  if (num_users == 1) p.psi(0, 0) = 0.0;
  for (std::size_t k = 0; k < num_facets; ++k) dirichlet_row(rng, h.gamma, p.beta.row(k));
  p.user_rating_mean.resize(num_users);
  for (double& m : p.user_rating_mean) m = 2.5 + 2.0 * uniform01(rng);
  return p;
}

Generated generate(const GroundTruthParams& params, const GenSchedule& schedule,
                   std::uint64_t seed, const RatingModel& ratings) {
  params.validate();
  const std::size_t U = params.num_users();
  const std::size_t K = params.num_facets();
  const std::size_t W = params.vocab_size();
  for (std::size_t i = 0; i < schedule.items.size(); ++i) {
    const auto& list = schedule.items[i];
    if (list.empty()) throw InvalidArgument("schedule item " + std::to_string(i) + " has no reviews");
    for (std::size_t p = 0; p < list.size(); ++p) {
      if (list[p].user >= U) throw InvalidArgument("schedule references an unknown user");
      if (list[p].length == 0) throw InvalidArgument("scheduled review length must be positive");
      if (p > 0 && list[p].timestamp <= list[p - 1].timestamp) {
        throw InvalidArgument("schedule timestamps must increase strictly within an item");
      }
    }
  }

  std::vector<std::vector<double>> theta_cdf(U), beta_cdf(K);
  for (std::size_t u = 0; u < U; ++u) theta_cdf[u] = cumulative(params.theta.row(u));
  for (std::size_t k = 0; k < K; ++k) beta_cdf[k] = cumulative(params.beta.row(k));

  Rng rng(seed);
  Vocabulary vocab;
  for (std::size_t w = 0; w < W; ++w) vocab.add("w" + std::to_string(w));
  NameTable users;
  for (std::size_t u = 0; u < U; ++u) users.intern("u" + std::to_string(u));
  NameTable items;
  for (std::size_t i = 0; i < schedule.items.size(); ++i) items.intern("i" + std::to_string(i));

  std::vector<Review> reviews;
  TrueAssignments truth;
  std::vector<double> candidate_cdf;
  std::vector<ReviewId> candidate_review;

  for (std::size_t item = 0; item < schedule.items.size(); ++item) {
    const auto& list = schedule.items[item];
    const ReviewId first = static_cast<ReviewId>(reviews.size());
    for (std::size_t p = 0; p < list.size(); ++p) {
      const ScheduledReview& entry = list[p];
      const UserId u = entry.user;
      const ReviewId id = static_cast<ReviewId>(reviews.size());

      // Candidate authors: latest earlier review per distinct author, u excluded.
      candidate_cdf.clear();
      candidate_review.clear();
      for (std::size_t q = p; q-- > 0;) {
        const UserId author = list[q].user;
        if (author == u) continue;
        bool seen = false;
        for (ReviewId r : candidate_review) seen = seen || reviews[r].user == author;
        if (seen) continue;
        double weight = params.psi(u, author);
        if (weight <= 0.0) continue;
        candidate_review.push_back(first + static_cast<ReviewId>(q));
        candidate_cdf.push_back((candidate_cdf.empty() ? 0.0 : candidate_cdf.back()) + weight);
      }

      Review r;
      r.id = id;
      r.user = u;
      r.item = static_cast<ItemId>(item);
      r.timestamp = entry.timestamp;
      std::vector<std::uint8_t> s(entry.length);
      std::vector<std::int32_t> v(entry.length, -1);
      std::vector<std::uint32_t> z(entry.length);
      r.tokens.resize(entry.length);
      for (std::uint32_t j = 0; j < entry.length; ++j) {
        bool influenced = uniform01(rng) < params.pi[u];
        if (influenced && candidate_review.empty()) influenced = false;
        if (influenced) {
          ReviewId source = candidate_review[draw_cumulative(rng, candidate_cdf)];
          const auto& source_z = truth.z[source];
          s[j] = 1;
          v[j] = static_cast<std::int32_t>(source);
          z[j] = source_z[uniform_index(rng, source_z.size())];
        } else {
          z[j] = static_cast<std::uint32_t>(draw_cumulative(rng, theta_cdf[u]));
        }
        r.tokens[j] = static_cast<WordId>(draw_cumulative(rng, beta_cdf[z[j]]));
      }

      // Rating: copy from the dominant source review, else the user's own level.
      double rating = 0.0;
      std::int32_t dominant = -1;
      if (ratings.copy_influencer) {
        std::vector<std::pair<std::int32_t, int>> tally;
        for (std::int32_t src : v) {
          if (src < 0) continue;
          auto it = std::find_if(tally.begin(), tally.end(),
                                 [&](const auto& e) { return e.first == src; });
          if (it == tally.end()) {
            tally.emplace_back(src, 1);
          } else {
            ++it->second;
          }
        }
        int best = 0;
        for (const auto& [src, n] : tally) {
          if (n > best || (n == best && src < dominant)) {
            best = n;
            dominant = src;
          }
        }
      }
      if (dominant >= 0) {
        rating = reviews[static_cast<std::size_t>(dominant)].rating;
      } else {
        rating = params.user_rating_mean.empty() ? 3.0 : params.user_rating_mean[u];
        if (item < params.item_rating_offset.size()) rating += params.item_rating_offset[item];
        if (!params.facet_sentiment.empty()) {
          double mood = 0.0;
          for (std::uint32_t f : z) mood += params.facet_sentiment[f];
          rating += ratings.sentiment_weight * mood / static_cast<double>(z.size());
        }
      }
      r.rating = rating + (ratings.noise_sd > 0.0 ? normal_draw(rng, ratings.noise_sd) : 0.0);

      reviews.push_back(std::move(r));
      truth.s.push_back(std::move(s));
      truth.v.push_back(std::move(v));
      truth.z.push_back(std::move(z));
    }
  }
  return {Corpus::build(std::move(vocab), std::move(users), std::move(items), std::move(reviews)),
          std::move(truth)};
}

GenSchedule random_schedule(std::size_t num_users, std::size_t num_items,
                            std::size_t reviews_per_item, std::uint32_t mean_length,
                            std::uint64_t seed) {
  if (num_users == 0 || reviews_per_item == 0) {
    throw InvalidArgument("random schedule needs users and at least one review per item");
  }
  Rng rng(seed);
  GenSchedule schedule;
  schedule.items.resize(num_items);
  std::vector<UserId> pool(num_users);
  std::iota(pool.begin(), pool.end(), 0);
  const std::size_t n = std::min(reviews_per_item, num_users);
  for (auto& list : schedule.items) {
    // Partial Fisher-Yates: the first n entries become a random ordered subset.
    for (std::size_t j = 0; j < n; ++j) {
      std::swap(pool[j], pool[j + uniform_index(rng, num_users - j)]);
    }
    std::int64_t t = 0;
    for (std::size_t j = 0; j < n; ++j) {
      t += 1 + static_cast<std::int64_t>(uniform_index(rng, 3600));
      list.push_back({pool[j], t, length_draw(rng, mean_length)});
    }
  }
  return schedule;
}

Scenario make_scenario(const ScenarioConfig& c, std::uint64_t seed) {
  if (c.num_leaders == 0 || c.num_leaders >= c.num_users || c.num_users < 3) {
    throw InvalidArgument("scenario needs at least one leader, one follower and three users");
  }
  if (c.leaders_per_item > c.num_leaders) throw InvalidArgument("leaders_per_item exceeds leaders");
  Rng rng(seed);
  const std::size_t U = c.num_users;
  const std::size_t K = c.num_facets;
  Scenario sc;
  GroundTruthParams& p = sc.params;
  p.theta = Matrix<double>(U, K);
  p.psi = Matrix<double>(U, U);
  p.beta = Matrix<double>(K, c.vocab_size);
  p.pi.resize(U);
  sc.planted_influencer.assign(U, -1);

  std::vector<std::vector<UserId>> followers(c.num_leaders);
  for (std::size_t u = 0; u < U; ++u) {
    dirichlet_row(rng, c.theta_alpha, p.theta.row(u));
    bool leader = u < c.num_leaders;
    if (!leader) {
      auto boss = static_cast<UserId>(uniform_index(rng, c.num_leaders));
      sc.planted_influencer[u] = static_cast<std::int32_t>(boss);
      followers[boss].push_back(static_cast<UserId>(u));
    }
    const double spread = leader ? 1.0 / static_cast<double>(U - 1)
                                 : (1.0 - c.dominant_mass) / static_cast<double>(U - 2);
    for (std::size_t v = 0; v < U; ++v) p.psi(u, v) = v == u ? 0.0 : spread;
    if (!leader) p.psi(u, static_cast<std::size_t>(sc.planted_influencer[u])) = c.dominant_mass;
    p.pi[u] = (leader && c.leader_pi >= 0.0)
                  ? c.leader_pi
                  : beta_draw(rng, c.pi_mean * c.pi_concentration,
                              (1.0 - c.pi_mean) * c.pi_concentration);
  }
  for (std::size_t k = 0; k < K; ++k) dirichlet_row(rng, c.beta_gamma, p.beta.row(k));
  p.user_rating_mean.resize(U);
  for (double& m : p.user_rating_mean) m = 2.5 + 2.0 * uniform01(rng);
  p.item_rating_offset.resize(c.num_items);
  for (double& o : p.item_rating_offset) o = normal_draw(rng, 0.5);
  p.facet_sentiment.resize(K);
  for (double& f : p.facet_sentiment) f = c.sentiment_spread * (2.0 * uniform01(rng) - 1.0);

  sc.schedule.items.resize(c.num_items);
  std::vector<UserId> leaders(c.num_leaders);
  std::iota(leaders.begin(), leaders.end(), 0);
  for (auto& list : sc.schedule.items) {
    std::vector<bool> taken(U, false);
    auto add = [&](UserId u, std::int64_t t) {
      if (taken[u]) return;
      taken[u] = true;
      list.push_back({u, t, length_draw(rng, c.mean_length)});
    };
    for (std::size_t j = 0; j < c.leaders_per_item; ++j) {
      std::swap(leaders[j], leaders[j + uniform_index(rng, c.num_leaders - j)]);
    }
    for (std::size_t j = 0; j < c.leaders_per_item; ++j) {
      UserId leader = leaders[j];
      add(leader, static_cast<std::int64_t>(uniform_index(rng, 100000)));
      for (UserId f : followers[leader]) {
        if (uniform01(rng) < c.follow_probability) {
          add(f, 100000 + static_cast<std::int64_t>(uniform_index(rng, 100000)));
        }
      }
    }
    for (std::size_t j = 0; j < c.random_reviewers_per_item; ++j) {
      add(static_cast<UserId>(uniform_index(rng, U)),
          static_cast<std::int64_t>(uniform_index(rng, 200000)));
    }
    std::stable_sort(list.begin(), list.end(),
                     [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
    for (std::size_t q = 1; q < list.size(); ++q) {
      list[q].timestamp = std::max(list[q].timestamp, list[q - 1].timestamp + 1);
    }
  }
  return sc;
}

void save_ground_truth(const GroundTruthParams& params, const TrueAssignments& truth,
                       const std::filesystem::path& path) {
  auto matrix = [](const Matrix<double>& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t r = 0; r < m.rows(); ++r) {
      rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
    }
    return rows;
  };
  nlohmann::json j = {{"theta", matrix(params.theta)},
                      {"psi", matrix(params.psi)},
                      {"pi", params.pi},
                      {"beta", matrix(params.beta)},
                      {"user_rating_mean", params.user_rating_mean},
                      {"item_rating_offset", params.item_rating_offset},
                      {"facet_sentiment", params.facet_sentiment}};
  nlohmann::json assignments = nlohmann::json::array();
  for (std::size_t d = 0; d < truth.s.size(); ++d) {
    assignments.push_back({{"review", d}, {"s", truth.s[d]}, {"v", truth.v[d]}, {"z", truth.z[d]}});
  }
  j["assignments"] = std::move(assignments);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump() << '\n';
}

}  // namespace ghostlink::synth
