#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ghostlink/corpus.hpp"
#include "ghostlink/hyper.hpp"
#include "ghostlink/matrix.hpp"
#include "ghostlink/rng.hpp"

namespace ghostlink {

enum class Mode { ghostlink, author_topic };
enum class Granularity { per_token, per_unique_token };
// How the s = 1 weight aggregates over candidate reviews: the largest facet
// factor, or the factor averaged under the renormalized influencer prior.
enum class InfluenceRule { max, sum };

std::string to_string(Mode mode);
std::string to_string(Granularity granularity);
std::string to_string(InfluenceRule rule);
InfluenceRule parse_influence_rule(const std::string& text);
Mode parse_mode(const std::string& text);
Granularity parse_granularity(const std::string& text);

inline constexpr std::int32_t kNoInfluencer = -1;

/// Count tables driving the Gibbs updates. All counts are token mass: a slot
/// standing for c copies of a word contributes c units.
struct CountTables {
  std::size_t num_users = 0;
  std::size_t num_facets = 0;

  Matrix<std::int32_t> user_influence;  // n(u, s): U x 2
  // n(u, v, s=1) keyed by influencer user. Zero entries are erased.
  std::vector<std::unordered_map<UserId, std::int32_t>> user_influencer;
  Matrix<std::int32_t> user_facet_latent;  // n(u, z, s=0): U x K
  Matrix<std::int32_t> review_facet;       // n(d, z): D x K
  Matrix<std::int32_t> word_facet;         // n(z, w) stored word-major: W x K
  std::vector<std::int32_t> facet_total;   // n(z): K
  Matrix<std::int32_t> influencer_facet;   // n(v, z, s=1) by influencer user: U x K

  bool operator==(const CountTables&) const = default;
};

/// Latent state for one chain. The corpus is shared and never mutated.
class ModelState {
 public:
  ModelState(std::shared_ptr<const Corpus> corpus, HyperParams hyper, Mode mode,
             Granularity granularity, std::uint64_t seed);

  const Corpus& corpus() const { return *corpus_; }
  std::shared_ptr<const Corpus> corpus_ptr() const { return corpus_; }
  const HyperParams& hyper() const { return hyper_; }
  Mode mode() const { return mode_; }
  Granularity granularity() const { return granularity_; }
  const CountTables& counts() const { return counts_; }
  std::uint32_t iteration() const { return iteration_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  // Slots are tokens (per_token) or distinct words of a review with their
  // multiplicity (per_unique_token), grouped by review in review-id order.
  std::size_t num_slots() const { return slot_word_.size(); }
  std::size_t slot_begin(ReviewId d) const { return slot_begin_[d]; }
  std::size_t slot_end(ReviewId d) const { return slot_begin_[d + 1]; }
  WordId slot_word(std::size_t slot) const { return slot_word_[slot]; }
  std::uint32_t slot_count(std::size_t slot) const { return slot_count_[slot]; }
  ReviewId slot_review(std::size_t slot) const { return slot_review_[slot]; }

  std::uint8_t s(std::size_t slot) const { return s_[slot]; }
  std::int32_t v(std::size_t slot) const { return v_[slot]; }
  std::uint32_t z(std::size_t slot) const { return z_[slot]; }
  const std::vector<std::uint8_t>& s_all() const { return s_; }
  const std::vector<std::int32_t>& v_all() const { return v_; }
  const std::vector<std::uint32_t>& z_all() const { return z_; }

  /// Optional cap on how many of the latest predecessors are scanned.
  void set_candidate_cap(std::optional<std::uint32_t> cap) { candidate_cap_ = cap; }
  void set_influence_rule(InfluenceRule rule) { rule_ = rule; }
  InfluenceRule influence_rule() const { return rule_; }

  /// Replaces every assignment and rebuilds the tables. Used when loading a
  /// snapshot and by tests that need a hand-made state.
  void assign(std::vector<std::uint8_t> s, std::vector<std::int32_t> v,
              std::vector<std::uint32_t> z);

  /// Full recount from the assignments.
  CountTables tabulate() const;

  /// Throws Error on any broken invariant (negative counts, mismatched
  /// totals, bad influencer pointers, tables differing from a recount).
  void audit() const;

  Rng& rng() { return rng_; }
  const Rng& rng() const { return rng_; }

  // Single-token Gibbs steps. remove()/add() move the slot's current
  // assignment out of / into the tables with weight c.
  void remove(std::size_t slot);
  void add(std::size_t slot);

  struct InfluenceDecision {
    std::uint8_t s = 0;
    std::int32_t v = kNoInfluencer;
    double p0 = 0.0;  // unnormalized weight of s = 0
    double p1 = 0.0;  // unnormalized weight of s = 1 (max over candidates)
  };

  /// Resamples (s, v) for a removed slot keeping z fixed.
  InfluenceDecision resample_influence(std::size_t slot);
  /// Resamples z for a removed slot keeping (s, v) fixed.
  std::uint32_t resample_facet(std::size_t slot);
  /// remove, resample_influence, resample_facet, add.
  void update_slot(std::size_t slot);

  /// One pass over every item and its reviews in temporal order.
  void sweep();

  /// Sum over slots of c * log sum_z theta'(z) phi(z, w).
  double log_likelihood(unsigned threads = 1) const;

  void set_iteration(std::uint32_t it) { iteration_ = it; }

 private:
  std::span<const ReviewId> candidates(ReviewId d) const;
  void refresh_inv_denom(std::uint32_t z);

  std::shared_ptr<const Corpus> corpus_;
  HyperParams hyper_;
  Mode mode_;
  Granularity granularity_;
  std::optional<std::uint32_t> candidate_cap_;
  InfluenceRule rule_ = InfluenceRule::max;
  std::vector<std::string> warnings_;

  std::vector<std::size_t> slot_begin_;
  std::vector<WordId> slot_word_;
  std::vector<std::uint32_t> slot_count_;
  std::vector<ReviewId> slot_review_;
  std::vector<std::int32_t> review_mass_;

  std::vector<std::uint8_t> s_;
  std::vector<std::int32_t> v_;
  std::vector<std::uint32_t> z_;

  CountTables counts_;
  std::vector<double> inv_denom_;  // 1 / (n(z) + W gamma)
  std::vector<double> scratch_;
  Rng rng_;
  std::uint32_t iteration_ = 0;
};

struct SamplerConfig {
  std::uint32_t max_iters = 50;
  double rel_ll_tol = 1e-4;
  std::uint32_t window = 3;
  std::uint64_t seed = 1;
  Mode mode = Mode::ghostlink;
  Granularity granularity = Granularity::per_token;
  std::optional<std::uint32_t> candidate_cap;
  InfluenceRule influence_rule = InfluenceRule::max;
  unsigned threads = 1;
  std::function<void(std::uint32_t iteration, double ll)> on_iteration;
};

struct RunResult {
  ModelState state;
  std::vector<double> ll_trace;  // index 0 is the initialized state
  bool converged = false;
};

/// Sweeps until the relative LL change stays below rel_ll_tol for `window`
/// consecutive iterations, or max_iters is reached.
RunResult run(std::shared_ptr<const Corpus> corpus, const HyperParams& hyper,
              const SamplerConfig& config);

/// Influence weights for hand-checkable examples: no smoothing and no
/// exclusion of the token itself. Test-only evaluation path.
struct ExampleInfluenceWeights {
  double p0 = 0.0;
  std::vector<std::pair<ReviewId, double>> p1;  // per candidate review
  std::int32_t best = kNoInfluencer;
};
ExampleInfluenceWeights unsmoothed_influence_weights(const ModelState& state, std::size_t slot);

inline constexpr int kModelFormatVersion = 1;

/// Writes hyper.json, assignments.bin, counts/*.tsv, rng_state.txt and
/// lltrace.csv into dir.
void save_model(const ModelState& state, const std::vector<double>& ll_trace,
                const std::filesystem::path& dir);
ModelState load_model(std::shared_ptr<const Corpus> corpus, const std::filesystem::path& dir);
std::vector<double> load_ll_trace(const std::filesystem::path& dir);

}  // namespace ghostlink
