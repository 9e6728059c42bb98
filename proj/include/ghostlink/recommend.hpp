#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ghostlink/corpus.hpp"
#include "ghostlink/matrix.hpp"
#include "ghostlink/network.hpp"
#include "ghostlink/sampler.hpp"
#include "json.hpp"

namespace ghostlink::recommend {

// Feature families as bit flags.
enum FeatureFamily : unsigned { kF1 = 1u, kF2 = 2u, kF3 = 4u };

/// "F1+F2+F3" style name; families in ascending order.
std::string feature_set_name(unsigned set);
/// Accepts names like "F2", "F2+F3", "f1,f2,f3". Throws InvalidArgument on an
/// empty or unknown set.
unsigned parse_feature_set(const std::string& text);

struct SparseEntry {
  std::uint32_t index = 0;
  double value = 0.0;
  bool operator==(const SparseEntry&) const = default;
};

struct FeatureRow {
  ReviewId review_id = 0;
  std::vector<SparseEntry> f1;  // sorted by word id
  double gamma_g = 0.0;
  double gamma_u = 0.0;
  double gamma_i = 0.0;
  double gamma_r = 0.0;
  double gamma_d = 0.0;
  double gamma_dc = 0.0;
  double target = 0.0;
};

/// beta(z, w) = (n(w, z) + gamma) / (n(z) + W gamma) as a K x W matrix.
Matrix<double> facet_word_distribution(const ModelState& state);

/// log max_z beta(z, w) per word.
std::vector<double> log_max_beta(const Matrix<double>& beta);

/// One entry per distinct word of the review, value log max_z beta(z, w).
std::vector<SparseEntry> f1_features(const Review& review, std::span<const double> log_max);

/// Mean ratings over a training subset. Users and items without training
/// reviews fall back to the global mean.
struct RatingBias {
  double global = 0.0;
  std::vector<double> user;
  std::vector<double> item;
  std::vector<std::uint32_t> user_count;
  std::vector<std::uint32_t> item_count;

  double user_bias(UserId u) const { return user_count.at(u) ? user[u] : global; }
  double item_bias(ItemId i) const { return item_count.at(i) ? item[i] : global; }
};

/// Throws InvalidArgument on an empty training set.
RatingBias f2_statistics(const Corpus& corpus, std::span<const ReviewId> training);

/// Fold-independent sums behind the temporal features of one review.
struct ReviewHistory {
  std::uint32_t earlier = 0;            // strictly earlier reviews on the item
  double earlier_rating_sum = 0.0;
  std::uint32_t earlier_others = 0;     // ... written by other users
  double weighted_rating_sum = 0.0;     // sum psi(u, v) y_v over those
  std::int64_t token_mass = 0;          // |d|
  std::int64_t influenced_mass = 0;     // tokens with s = 1
  double influenced_rating_sum = 0.0;   // sum over s = 1 tokens of psi(u, v_w) y_{v_w}
};

ReviewHistory review_history(const ModelState& state, const network::InfluenceMatrix& psi,
                             ReviewId d);

struct TemporalFeatures {
  double gamma_r = 0.0;
  double gamma_d = 0.0;
  double gamma_dc = 0.0;
};

/// gamma_r: mean earlier rating on the item (fallback gamma_g). gamma_d: mean
/// of psi(u, v) y_v over earlier reviews by other users (fallback gamma_u).
/// gamma_dc: per-token average of psi(u, v_w) y_{v_w} for influenced tokens
/// and gamma_u for the rest; exactly gamma_u when no token is influenced.
TemporalFeatures temporal_features(const ReviewHistory& h, double gamma_g, double gamma_u);

TemporalFeatures f3_features(const ModelState& state, const network::InfluenceMatrix& psi,
                             const RatingBias& bias, ReviewId d);

/// Fold-independent inputs for building rows: F1 vectors and histories.
struct FeatureCache {
  std::size_t vocab_size = 0;
  std::vector<std::vector<SparseEntry>> f1;
  std::vector<ReviewHistory> history;
};

FeatureCache build_cache(const ModelState& state, unsigned threads = 1);

FeatureRow make_row(const Corpus& corpus, const FeatureCache& cache, const RatingBias& bias,
                    ReviewId d);

/// Columns: F1 words at [0, W), F2 at W..W+2 (g, u, i), F3 at W+3..W+5 (r, d, dc).
std::size_t design_width(std::size_t vocab_size);
std::vector<SparseEntry> design_row(const FeatureRow& row, unsigned set, std::size_t vocab_size);

struct RegressionModel {
  double lambda = 1.0;
  double intercept = 0.0;
  double offset = 0.0;  // intercept with the column centering folded in
  std::vector<double> mean;     // per column
  std::vector<double> scale;    // per column; 0 marks a dropped constant column
  std::vector<double> weights;  // on standardized columns
  std::uint32_t cg_iterations = 0;

  double predict(std::span<const SparseEntry> x) const;
};

/// Ridge regression on standardized columns: minimizes
/// sum (y - yhat)^2 + lambda |w|^2 with an unpenalized intercept. Constant
/// columns are dropped; identical targets give an intercept-only model.
RegressionModel train(const std::vector<std::vector<SparseEntry>>& rows,
                      std::span<const double> targets, std::size_t num_columns,
                      double lambda = 1.0);

struct CvOptions {
  std::uint32_t folds = 10;
  std::uint64_t seed = 1;
  double lambda = 1.0;
  unsigned threads = 1;
};

struct CvResult {
  unsigned feature_set = 0;
  std::vector<double> per_fold_mse;
  double mean_mse = 0.0;
  std::uint64_t seed = 0;
};

/// Seeded random assignment of reviews to folds.
std::vector<std::uint32_t> assign_folds(std::size_t num_reviews, std::uint32_t folds,
                                        std::uint64_t seed);

/// MSE normalized by the number of predicted reviews.
CvResult cross_validate(const ModelState& state, unsigned feature_set, const CvOptions& options = {});
CvResult cross_validate(const Corpus& corpus, const FeatureCache& cache, unsigned feature_set,
                        const CvOptions& options = {});

nlohmann::json to_json(const CvResult& result);

/// "target index:value ..." with 1-based indices, one line per row.
void write_libsvm(const std::vector<FeatureRow>& rows, unsigned set, std::size_t vocab_size,
                  const std::filesystem::path& path);

}  // namespace ghostlink::recommend
