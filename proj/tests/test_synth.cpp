#include <cmath>
#include <fstream>
#include <map>

#include "doctest.h"
#include "ghostlink/error.hpp"
#include "ghostlink/synth.hpp"
#include "helpers.hpp"
#include "json.hpp"

using namespace ghostlink;
using namespace ghostlink::synth;

namespace {

GroundTruthParams tiny_params(std::size_t U, std::size_t K, std::size_t W) {
  GroundTruthParams p;
  p.theta = Matrix<double>(U, K, 1.0 / K);
  p.psi = Matrix<double>(U, U, U > 1 ? 1.0 / (U - 1) : 0.0);
  for (std::size_t u = 0; u < U; ++u) p.psi(u, u) = 0.0;
  p.pi.assign(U, 0.0);
  p.beta = Matrix<double>(K, W, 1.0 / W);
  return p;
}

// Checks that observed counts lie within 3 sigma of a multinomial expectation.
void check_multinomial(const std::vector<double>& probs, const std::vector<std::size_t>& counts) {
  std::size_t n = 0;
  for (auto c : counts) n += c;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    const double expected = n * probs[k];
    const double sigma = std::sqrt(n * probs[k] * (1.0 - probs[k]));
    CHECK(std::fabs(counts[k] - expected) <= 3.0 * sigma + 1e-9);
  }
}

}  // namespace

TEST_CASE("sample_params is deterministic per seed") {
  HyperParams h = HyperParams::defaults(4, 6);
  auto a = sample_params(h, 6, 4, 30, 99);
  auto b = sample_params(h, 6, 4, 30, 99);
  CHECK(a.theta == b.theta);
  CHECK(a.psi == b.psi);
  CHECK(a.pi == b.pi);
  CHECK(a.beta == b.beta);
  auto c = sample_params(h, 6, 4, 30, 100);
  CHECK_FALSE(a.theta == c.theta);
}

TEST_CASE("sample_params rows are distributions and psi has a zero diagonal") {
  HyperParams h = HyperParams::defaults(5, 8);
  auto p = sample_params(h, 8, 5, 40, 3);
  CHECK_NOTHROW(p.validate());
  for (std::size_t u = 0; u < 8; ++u) {
    double t = 0.0, s = 0.0;
    for (double x : p.theta.row(u)) t += x;
    for (double x : p.psi.row(u)) s += x;
    CHECK(std::fabs(t - 1.0) < 1e-9);
    CHECK(std::fabs(s - 1.0) < 1e-9);
    CHECK(p.psi(u, u) == 0.0);
    CHECK(p.pi[u] >= 0.0);
    CHECK(p.pi[u] <= 1.0);
  }
  for (std::size_t k = 0; k < 5; ++k) {
    double b = 0.0;
    for (double x : p.beta.row(k)) b += x;
    CHECK(std::fabs(b - 1.0) < 1e-9);
  }
}

TEST_CASE("uniform theta limit gives rows of 1/K") {
  HyperParams h = HyperParams::defaults(4, 3);
  auto p = sample_params(h, 3, 4, 10, 1, SampleOptions{true});
  for (double x : p.theta.data()) CHECK(x == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("single facet gives an all-ones theta") {
  HyperParams h = HyperParams::defaults(1, 5);
  auto p = sample_params(h, 5, 1, 10, 1);
  for (double x : p.theta.data()) CHECK(x == 1.0);
}

TEST_CASE("sample_params rejects bad inputs") {
  HyperParams h = HyperParams::defaults(3, 3);
  h.alpha = 0.0;
  CHECK_THROWS_AS(sample_params(h, 3, 3, 10, 1), InvalidArgument);
  CHECK_THROWS_AS(sample_params(HyperParams::defaults(3, 3), 0, 3, 10, 1), InvalidArgument);
}

TEST_CASE("zero vulnerability yields an uninfluenced corpus") {
  HyperParams h = HyperParams::defaults(3, 6);
  auto p = sample_params(h, 6, 3, 20, 5);
  p.pi.assign(6, 0.0);
  auto schedule = random_schedule(6, 10, 4, 12, 2);
  auto g = generate(p, schedule, 7);
  for (const auto& s : g.truth.s) {
    for (auto x : s) CHECK(x == 0);
  }
}

TEST_CASE("first review on every item is never influenced") {
  HyperParams h = HyperParams::defaults(3, 6);
  auto p = sample_params(h, 6, 3, 20, 5);
  p.pi.assign(6, 1.0);
  auto schedule = random_schedule(6, 15, 4, 12, 2);
  auto g = generate(p, schedule, 7);
  for (ItemId i = 0; i < g.corpus.num_items(); ++i) {
    const ReviewId first = g.corpus.item_reviews(i).front();
    for (auto x : g.truth.s[first]) CHECK(x == 0);
  }
}

TEST_CASE("one-hot facets and preferences give single-word reviews") {
  const std::size_t U = 3, K = 3, W = 3;
  auto p = tiny_params(U, K, W);
  p.theta = Matrix<double>(U, K);
  p.beta = Matrix<double>(K, W);
  for (std::size_t u = 0; u < U; ++u) p.theta(u, (u + 1) % K) = 1.0;
  for (std::size_t k = 0; k < K; ++k) p.beta(k, k) = 1.0;
  auto g = generate(p, random_schedule(U, 8, 3, 10, 4), 1);
  for (const auto& r : g.corpus.reviews()) {
    const WordId expected = static_cast<WordId>((r.user + 1) % K);
    for (WordId w : r.tokens) CHECK(w == expected);
    for (auto z : g.truth.z[r.id]) CHECK(z == expected);
  }
}

TEST_CASE("uninfluenced facet frequencies match theta") {
  auto p = tiny_params(1, 4, 10);
  const std::vector<double> theta = {0.1, 0.2, 0.3, 0.4};
  for (std::size_t k = 0; k < 4; ++k) p.theta(0, k) = theta[k];
  GenSchedule schedule;
  schedule.items.resize(100);
  for (auto& list : schedule.items) list.push_back({0, 1, 1000});
  auto g = generate(p, schedule, 11);
  std::vector<std::size_t> counts(4, 0);
  for (const auto& z : g.truth.z) {
    for (auto k : z) ++counts[k];
  }
  check_multinomial(theta, counts);
}

TEST_CASE("influencer choice follows psi renormalized over available authors") {
  auto p = tiny_params(5, 2, 5);
  // User 4 always writes last after users 0, 1 and 2; user 3 never reviews.
  for (std::size_t v = 0; v < 5; ++v) p.psi(4, v) = 0.0;
  p.psi(4, 0) = 0.4;
  p.psi(4, 1) = 0.2;
  p.psi(4, 2) = 0.1;
  p.psi(4, 3) = 0.3;
  p.pi[4] = 1.0;
  GenSchedule schedule;
  schedule.items.resize(400);
  for (auto& list : schedule.items) {
    list = {{0, 1, 3}, {1, 2, 3}, {2, 3, 3}, {4, 4, 100}};
  }
  auto g = generate(p, schedule, 5);
  std::vector<std::size_t> counts(3, 0);
  for (const auto& r : g.corpus.reviews()) {
    if (r.user != 4) continue;
    for (std::size_t j = 0; j < r.tokens.size(); ++j) {
      REQUIRE(g.truth.s[r.id][j] == 1);
      ++counts[g.corpus.review(static_cast<ReviewId>(g.truth.v[r.id][j])).user];
    }
  }
  check_multinomial({0.4 / 0.7, 0.2 / 0.7, 0.1 / 0.7}, counts);
}

TEST_CASE("influenced tokens copy a facet used in the source review") {
  HyperParams h = HyperParams::defaults(4, 6);
  auto p = sample_params(h, 6, 4, 30, 8);
  p.pi.assign(6, 0.7);
  auto g = generate(p, random_schedule(6, 20, 5, 15, 3), 9);
  for (const auto& r : g.corpus.reviews()) {
    for (std::size_t j = 0; j < r.tokens.size(); ++j) {
      if (g.truth.s[r.id][j] == 0) {
        CHECK(g.truth.v[r.id][j] == -1);
        continue;
      }
      const auto src = static_cast<ReviewId>(g.truth.v[r.id][j]);
      const auto& source = g.corpus.review(src);
      CHECK(source.item == r.item);
      CHECK(source.timestamp < r.timestamp);
      CHECK(source.user != r.user);
      const auto& used = g.truth.z[src];
      CHECK(std::find(used.begin(), used.end(), g.truth.z[r.id][j]) != used.end());
    }
  }
}

TEST_CASE("generation is a pure function of its inputs") {
  HyperParams h = HyperParams::defaults(3, 6);
  auto p = sample_params(h, 6, 3, 20, 5);
  auto schedule = random_schedule(6, 10, 4, 12, 2);
  auto a = generate(p, schedule, 21);
  auto b = generate(p, schedule, 21);
  REQUIRE(a.corpus.num_reviews() == b.corpus.num_reviews());
  for (ReviewId d = 0; d < a.corpus.num_reviews(); ++d) {
    CHECK(a.corpus.review(d).tokens == b.corpus.review(d).tokens);
    CHECK(a.corpus.review(d).rating == b.corpus.review(d).rating);
  }
  CHECK(a.truth.s == b.truth.s);
  CHECK(a.truth.v == b.truth.v);
  CHECK(a.truth.z == b.truth.z);
}

TEST_CASE("generate rejects malformed schedules") {
  auto p = tiny_params(2, 2, 4);
  GenSchedule empty_item;
  empty_item.items.resize(1);
  CHECK_THROWS_AS(generate(p, empty_item, 1), InvalidArgument);
  GenSchedule bad_user;
  bad_user.items = {{{5, 1, 3}}};
  CHECK_THROWS_AS(generate(p, bad_user, 1), InvalidArgument);
  GenSchedule tie;
  tie.items = {{{0, 1, 3}, {1, 1, 3}}};
  CHECK_THROWS_AS(generate(p, tie, 1), InvalidArgument);
}

TEST_CASE("influenced reviews copy the source rating") {
  auto p = tiny_params(2, 2, 4);
  p.pi = {0.0, 1.0};
  p.user_rating_mean = {4.25, 1.5};
  GenSchedule schedule;
  schedule.items = {{{0, 1, 5}, {1, 2, 5}}, {{1, 1, 5}}};
  RatingModel ratings;
  ratings.noise_sd = 0.0;
  auto g = generate(p, schedule, 1, ratings);
  CHECK(g.corpus.review(0).rating == 4.25);
  CHECK(g.corpus.review(1).rating == 4.25);
  CHECK(g.corpus.review(2).rating == 1.5);
}

TEST_CASE("scenario plants a dominant influencer for every follower") {
  ScenarioConfig c;
  c.num_users = 30;
  c.num_items = 20;
  c.num_leaders = 5;
  auto sc = make_scenario(c, 4);
  CHECK_NOTHROW(sc.params.validate());
  for (std::size_t u = 0; u < c.num_users; ++u) {
    if (u < c.num_leaders) {
      CHECK(sc.planted_influencer[u] == -1);
      continue;
    }
    const auto boss = sc.planted_influencer[u];
    REQUIRE(boss >= 0);
    CHECK(boss < static_cast<std::int32_t>(c.num_leaders));
    CHECK(sc.params.psi(u, static_cast<std::size_t>(boss)) >= 0.8);
  }
  for (const auto& list : sc.schedule.items) {
    for (std::size_t q = 1; q < list.size(); ++q) CHECK(list[q].timestamp > list[q - 1].timestamp);
  }
}

TEST_CASE("ground truth file holds parameters and assignments") {
  HyperParams h = HyperParams::defaults(2, 3);
  auto p = sample_params(h, 3, 2, 6, 1);
  auto g = generate(p, random_schedule(3, 2, 2, 4, 1), 1);
  auto dir = ghostlink::testing::scratch_dir("ground_truth");
  save_ground_truth(p, g.truth, dir / "gt.json");
  std::ifstream in(dir / "gt.json");
  auto j = nlohmann::json::parse(in);
  CHECK(j["theta"].size() == 3);
  CHECK(j["beta"].size() == 2);
  CHECK(j["assignments"].size() == g.corpus.num_reviews());
}
