#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ghostlink/corpus.hpp"
#include "ghostlink/hyper.hpp"
#include "ghostlink/matrix.hpp"

namespace ghostlink::synth {

/// Parameters of the generative process plus the rating model used to attach
/// ratings to generated reviews.
struct GroundTruthParams {
  Matrix<double> theta;  // U x K, facet preference per user
  Matrix<double> psi;    // U x U, influencer distribution per user, zero diagonal
  std::vector<double> pi;  // U, probability that a word is written under influence
  Matrix<double> beta;   // K x W, word distribution per facet

  std::vector<double> user_rating_mean;    // U
  std::vector<double> item_rating_offset;  // I (may be empty: treated as 0)
  std::vector<double> facet_sentiment;     // K (may be empty: treated as 0)

  std::size_t num_users() const { return theta.rows(); }
  std::size_t num_facets() const { return theta.cols(); }
  std::size_t vocab_size() const { return beta.cols(); }

  /// Throws InvalidArgument if a row is not stochastic or pi leaves [0, 1].
  void validate() const;
};

struct SampleOptions {
  bool uniform_theta = false;  // the alpha -> infinity limit
};

/// theta_u ~ Dir_K(alpha), psi_u ~ Dir_U(rho) with the diagonal removed,
/// pi_u ~ Beta(eta, eta), beta_k ~ Dir_W(gamma). Deterministic per seed.
GroundTruthParams sample_params(const HyperParams& hyper, std::size_t num_users,
                                std::size_t num_facets, std::size_t vocab_size,
                                std::uint64_t seed, SampleOptions options = {});

struct ScheduledReview {
  UserId user = 0;
  std::int64_t timestamp = 0;
  std::uint32_t length = 0;
};

/// Per item, the reviews to generate in strictly increasing timestamp order.
struct GenSchedule {
  std::vector<std::vector<ScheduledReview>> items;
};

struct RatingModel {
  double noise_sd = 0.1;
  // Reviews with influenced words copy the rating of the review that supplied
  // most of them, plus noise.
  bool copy_influencer = true;
  double sentiment_weight = 0.0;
};

/// Realized latent variables, token-parallel with each generated review.
struct TrueAssignments {
  std::vector<std::vector<std::uint8_t>> s;
  std::vector<std::vector<std::int32_t>> v;  // influencing review id, -1 for none
  std::vector<std::vector<std::uint32_t>> z;
};

struct Generated {
  Corpus corpus;
  TrueAssignments truth;
};

/// Forward simulation of the generative process over a schedule. Words under
/// influence pick an earlier review by renormalizing psi_u over the authors in
/// the influence view, then draw a facet from that review's realized facet
/// histogram. An empty (or self-only) view forces s = 0.
Generated generate(const GroundTruthParams& params, const GenSchedule& schedule,
                   std::uint64_t seed, const RatingModel& ratings = {});

/// Uniform random schedule: each item gets a random set of distinct users
/// with distinct increasing timestamps and Poisson-ish lengths.
GenSchedule random_schedule(std::size_t num_users, std::size_t num_items,
                            std::size_t reviews_per_item, std::uint32_t mean_length,
                            std::uint64_t seed);

/// Leader/follower world with planted dominant influencers.
struct ScenarioConfig {
  std::size_t num_users = 100;
  std::size_t num_items = 200;
  std::uint32_t num_facets = 5;
  std::size_t vocab_size = 500;
  std::size_t num_leaders = 20;
  std::size_t leaders_per_item = 2;
  double follow_probability = 0.6;
  std::size_t random_reviewers_per_item = 3;
  std::uint32_t mean_length = 40;
  double dominant_mass = 0.85;  // psi mass on the planted influencer
  double pi_mean = 0.4;
  double pi_concentration = 10.0;
  double leader_pi = -1.0;      // < 0: leaders draw pi like everyone else
  double theta_alpha = 0.2;
  double beta_gamma = 0.05;
  double sentiment_spread = 1.0;
};

struct Scenario {
  GroundTruthParams params;
  GenSchedule schedule;
  // Planted dominant influencer per user, -1 for leaders.
  std::vector<std::int32_t> planted_influencer;
};

Scenario make_scenario(const ScenarioConfig& config, std::uint64_t seed);

/// Writes theta, psi, pi, beta and the per-token assignments as JSON.
void save_ground_truth(const GroundTruthParams& params, const TrueAssignments& truth,
                       const std::filesystem::path& path);

}  // namespace ghostlink::synth
