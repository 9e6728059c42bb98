#include "ghostlink/recommend.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <thread>

#include "ghostlink/error.hpp"
#include "ghostlink/rng.hpp"

namespace ghostlink::recommend {

namespace {

template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn fn) {
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < n; i += workers) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

std::string feature_set_name(unsigned set) {
  std::string name;
  for (unsigned f = 0; f < 3; ++f) {
    if (set & (1u << f)) {
      if (!name.empty()) name += '+';
      name += "F" + std::to_string(f + 1);
    }
  }
  return name;
}

unsigned parse_feature_set(const std::string& text) {
  unsigned set = 0;
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    if (token == "F1") set |= kF1;
    else if (token == "F2") set |= kF2;
    else if (token == "F3") set |= kF3;
    else throw InvalidArgument("unknown feature family '" + token + "'");
    token.clear();
  };
  for (char ch : text) {
    if (ch == '+' || ch == ',' || std::isspace(static_cast<unsigned char>(ch))) {
      flush();
    } else {
      token += static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    }
  }
  flush();
  if (set == 0) throw InvalidArgument("feature set must name at least one of F1, F2, F3");
  return set;
}

Matrix<double> facet_word_distribution(const ModelState& state) {
  const CountTables& c = state.counts();
  const std::size_t K = c.num_facets;
  const std::size_t W = c.word_facet.rows();
  const double gamma = state.hyper().gamma;
  Matrix<double> beta(K, W);
  for (std::size_t k = 0; k < K; ++k) {
    const double denom = c.facet_total[k] + static_cast<double>(W) * gamma;
    for (std::size_t w = 0; w < W; ++w) beta(k, w) = (c.word_facet(w, k) + gamma) / denom;
  }
  return beta;
}

std::vector<double> log_max_beta(const Matrix<double>& beta) {
  std::vector<double> out(beta.cols());
  for (std::size_t w = 0; w < beta.cols(); ++w) {
    double best = 0.0;
    for (std::size_t k = 0; k < beta.rows(); ++k) best = std::max(best, beta(k, w));
    if (!(best > 0.0)) throw InvalidArgument("beta column has no positive entry");
    out[w] = std::log(best);
  }
  return out;
}

std::vector<SparseEntry> f1_features(const Review& review, std::span<const double> log_max) {
  std::vector<SparseEntry> out;
  out.reserve(review.unique_tokens.size());
  for (const auto& t : review.unique_tokens) out.push_back({t.word, log_max[t.word]});
  std::sort(out.begin(), out.end(),
            [](const SparseEntry& a, const SparseEntry& b) { return a.index < b.index; });
  return out;
}

RatingBias f2_statistics(const Corpus& corpus, std::span<const ReviewId> training) {
  if (training.empty()) throw InvalidArgument("rating bias needs at least one training review");
  RatingBias b;
  b.user.assign(corpus.num_users(), 0.0);
  b.item.assign(corpus.num_items(), 0.0);
  b.user_count.assign(corpus.num_users(), 0);
  b.item_count.assign(corpus.num_items(), 0);
  double total = 0.0;
  for (ReviewId d : training) {
    const Review& r = corpus.review(d);
    total += r.rating;
    b.user[r.user] += r.rating;
    b.item[r.item] += r.rating;
    ++b.user_count[r.user];
    ++b.item_count[r.item];
  }
  b.global = total / static_cast<double>(training.size());
  for (std::size_t u = 0; u < b.user.size(); ++u) {
    if (b.user_count[u]) b.user[u] /= b.user_count[u];
  }
  for (std::size_t i = 0; i < b.item.size(); ++i) {
    if (b.item_count[i]) b.item[i] /= b.item_count[i];
  }
  return b;
}

ReviewHistory review_history(const ModelState& state, const network::InfluenceMatrix& psi,
                             ReviewId d) {
  const Corpus& corpus = state.corpus();
  const Review& review = corpus.review(d);
  ReviewHistory h;
  for (ReviewId e : corpus.influence_view(d)) {
    const Review& earlier = corpus.review(e);
    ++h.earlier;
    h.earlier_rating_sum += earlier.rating;
    if (earlier.user == review.user) continue;
    ++h.earlier_others;
    h.weighted_rating_sum += psi.at(review.user, earlier.user) * earlier.rating;
  }
  for (std::size_t slot = state.slot_begin(d); slot < state.slot_end(d); ++slot) {
    const std::int64_t c = state.slot_count(slot);
    h.token_mass += c;
    if (state.s(slot) == 0) continue;
    const Review& source = corpus.review(static_cast<ReviewId>(state.v(slot)));
    h.influenced_mass += c;
    h.influenced_rating_sum +=
        static_cast<double>(c) * psi.at(review.user, source.user) * source.rating;
  }
  return h;
}

TemporalFeatures temporal_features(const ReviewHistory& h, double gamma_g, double gamma_u) {
  TemporalFeatures f;
  f.gamma_r = h.earlier ? h.earlier_rating_sum / h.earlier : gamma_g;
  f.gamma_d = h.earlier_others ? h.weighted_rating_sum / h.earlier_others : gamma_u;
  // Written as a correction to gamma_u so that no influenced token leaves it exact.
  f.gamma_dc = gamma_u;
  if (h.influenced_mass > 0 && h.token_mass > 0) {
    f.gamma_dc += (h.influenced_rating_sum - static_cast<double>(h.influenced_mass) * gamma_u) /
                  static_cast<double>(h.token_mass);
  }
  return f;
}

TemporalFeatures f3_features(const ModelState& state, const network::InfluenceMatrix& psi,
                             const RatingBias& bias, ReviewId d) {
  const Review& r = state.corpus().review(d);
  return temporal_features(review_history(state, psi, d), bias.global, bias.user_bias(r.user));
}

FeatureCache build_cache(const ModelState& state, unsigned threads) {
  const Corpus& corpus = state.corpus();
  const auto log_max = log_max_beta(facet_word_distribution(state));
  const auto psi = network::influence_matrix(state);
  FeatureCache cache;
  cache.vocab_size = corpus.vocab_size();
  cache.f1.resize(corpus.num_reviews());
  cache.history.resize(corpus.num_reviews());
  parallel_for(corpus.num_reviews(), threads, [&](std::size_t d) {
    const auto id = static_cast<ReviewId>(d);
    cache.f1[d] = f1_features(corpus.review(id), log_max);
    cache.history[d] = review_history(state, psi, id);
  });
  return cache;
}

FeatureRow make_row(const Corpus& corpus, const FeatureCache& cache, const RatingBias& bias,
                    ReviewId d) {
  const Review& r = corpus.review(d);
  FeatureRow row;
  row.review_id = d;
  row.f1 = cache.f1.at(d);
  row.gamma_g = bias.global;
  row.gamma_u = bias.user_bias(r.user);
  row.gamma_i = bias.item_bias(r.item);
  const auto t = temporal_features(cache.history.at(d), row.gamma_g, row.gamma_u);
  row.gamma_r = t.gamma_r;
  row.gamma_d = t.gamma_d;
  row.gamma_dc = t.gamma_dc;
  row.target = r.rating;
  return row;
}

std::size_t design_width(std::size_t vocab_size) { return vocab_size + 6; }

std::vector<SparseEntry> design_row(const FeatureRow& row, unsigned set, std::size_t vocab_size) {
  std::vector<SparseEntry> x;
  const auto W = static_cast<std::uint32_t>(vocab_size);
  if (set & kF1) x = row.f1;
  if (set & kF2) {
    x.push_back({W, row.gamma_g});
    x.push_back({W + 1, row.gamma_u});
    x.push_back({W + 2, row.gamma_i});
  }
  if (set & kF3) {
    x.push_back({W + 3, row.gamma_r});
    x.push_back({W + 4, row.gamma_d});
    x.push_back({W + 5, row.gamma_dc});
  }
  return x;
}

double RegressionModel::predict(std::span<const SparseEntry> x) const {
  double y = offset;
  for (const auto& e : x) {
    if (e.index < weights.size() && scale[e.index] > 0.0) {
      y += weights[e.index] * e.value / scale[e.index];
    }
  }
  return y;
}

RegressionModel train(const std::vector<std::vector<SparseEntry>>& rows,
                      std::span<const double> targets, std::size_t num_columns, double lambda) {
  if (rows.empty()) throw InvalidArgument("training needs at least one row");
  if (rows.size() != targets.size()) throw InvalidArgument("rows and targets differ in length");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidArgument("lambda must be finite and >= 0");
  const std::size_t n = rows.size();
  const std::size_t p = num_columns;
  const double dn = static_cast<double>(n);

  RegressionModel m;
  m.lambda = lambda;
  m.mean.assign(p, 0.0);
  m.scale.assign(p, 0.0);
  m.weights.assign(p, 0.0);

  double ybar = 0.0;
  for (double y : targets) ybar += y;
  ybar /= dn;
  m.intercept = ybar;
  bool constant_target = true;
  for (double y : targets) constant_target = constant_target && y == targets[0];
  if (constant_target) {
    m.intercept = targets[0];
    m.offset = targets[0];
    return m;
  }

  std::vector<std::size_t> nnz(p, 0);
  for (const auto& x : rows) {
    for (const auto& e : x) {
      if (e.index >= p) throw InvalidArgument("feature index outside the design width");
      if (!std::isfinite(e.value)) throw InvalidArgument("non-finite feature value");
      m.mean[e.index] += e.value;
      ++nnz[e.index];
    }
  }
  for (double& mu : m.mean) mu /= dn;
  std::vector<double> ss(p, 0.0);
  for (const auto& x : rows) {
    for (const auto& e : x) ss[e.index] += (e.value - m.mean[e.index]) * (e.value - m.mean[e.index]);
  }
  for (std::size_t j = 0; j < p; ++j) {
    const double var = (ss[j] + static_cast<double>(n - nnz[j]) * m.mean[j] * m.mean[j]) / dn;
    if (var > 1e-20 * std::max(1.0, m.mean[j] * m.mean[j])) m.scale[j] = std::sqrt(var);
  }

  // Standardized design X_s = (X - 1 mean^T) D^-1, applied without densifying.
  std::vector<double> t(n);
  auto apply_x = [&](const std::vector<double>& w) {
    double shift = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      if (m.scale[j] > 0.0) shift += m.mean[j] * w[j] / m.scale[j];
    }
    for (std::size_t i = 0; i < n; ++i) {
      double acc = -shift;
      for (const auto& e : rows[i]) {
        if (m.scale[e.index] > 0.0) acc += e.value * w[e.index] / m.scale[e.index];
      }
      t[i] = acc;
    }
  };
  auto apply_xt = [&](const std::vector<double>& r, std::vector<double>& g) {
    std::fill(g.begin(), g.end(), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      total += r[i];
      for (const auto& e : rows[i]) g[e.index] += e.value * r[i];
    }
    for (std::size_t j = 0; j < p; ++j) {
      g[j] = m.scale[j] > 0.0 ? (g[j] - m.mean[j] * total) / m.scale[j] : 0.0;
    }
  };

  std::vector<double> yc(n);
  for (std::size_t i = 0; i < n; ++i) yc[i] = targets[i] - ybar;
  std::vector<double> b(p), r(p), dir(p), ad(p);
  apply_xt(yc, b);
  r = b;
  dir = r;
  double rr = 0.0;
  for (double x : r) rr += x * x;
  const double stop = 1e-24 * std::max(rr, 1e-300);
  std::size_t active = 0;
  for (double s : m.scale) active += s > 0.0;
  const std::size_t max_iter = std::min<std::size_t>(2 * active + 50, 5000);
  for (std::size_t it = 0; it < max_iter && rr > stop; ++it) {
    apply_x(dir);
    apply_xt(t, ad);
    double dad = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      ad[j] += lambda * dir[j];
      dad += dir[j] * ad[j];
    }
    if (!(dad > 0.0)) break;
    const double step = rr / dad;
    double rr_next = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      m.weights[j] += step * dir[j];
      r[j] -= step * ad[j];
      rr_next += r[j] * r[j];
    }
    const double beta = rr_next / rr;
    for (std::size_t j = 0; j < p; ++j) dir[j] = r[j] + beta * dir[j];
    rr = rr_next;
    m.cg_iterations = static_cast<std::uint32_t>(it + 1);
  }
  m.offset = m.intercept;
  for (std::size_t j = 0; j < p; ++j) {
    if (!std::isfinite(m.weights[j])) throw Error("ridge solve produced a non-finite weight");
    if (m.scale[j] > 0.0) m.offset -= m.weights[j] * m.mean[j] / m.scale[j];
  }
  return m;
}

std::vector<std::uint32_t> assign_folds(std::size_t num_reviews, std::uint32_t folds,
                                        std::uint64_t seed) {
  if (folds < 2) throw InvalidArgument("cross validation needs at least 2 folds");
  if (num_reviews < folds) throw InvalidArgument("fewer reviews than folds");
  std::vector<std::uint32_t> order(num_reviews);
  for (std::size_t i = 0; i < num_reviews; ++i) order[i] = static_cast<std::uint32_t>(i);
  Rng rng(seed);
  for (std::size_t i = num_reviews - 1; i > 0; --i) {
    std::swap(order[i], order[uniform_index(rng, i + 1)]);
  }
  std::vector<std::uint32_t> fold(num_reviews);
  for (std::size_t pos = 0; pos < num_reviews; ++pos) {
    fold[order[pos]] = static_cast<std::uint32_t>(pos % folds);
  }
  return fold;
}

CvResult cross_validate(const Corpus& corpus, const FeatureCache& cache, unsigned feature_set,
                        const CvOptions& options) {
  if (feature_set == 0 || (feature_set & ~7u)) throw InvalidArgument("feature set must be a non-empty subset of F1, F2, F3");
  const auto fold = assign_folds(corpus.num_reviews(), options.folds, options.seed);
  const std::size_t width = design_width(cache.vocab_size);

  CvResult result;
  result.feature_set = feature_set;
  result.seed = options.seed;
  result.per_fold_mse.assign(options.folds, 0.0);
  parallel_for(options.folds, options.threads, [&](std::size_t f) {
    std::vector<ReviewId> train_ids, test_ids;
    for (std::size_t d = 0; d < fold.size(); ++d) {
      (fold[d] == f ? test_ids : train_ids).push_back(static_cast<ReviewId>(d));
    }
    const RatingBias bias = f2_statistics(corpus, train_ids);
    std::vector<std::vector<SparseEntry>> rows;
    std::vector<double> targets;
    rows.reserve(train_ids.size());
    for (ReviewId d : train_ids) {
      const FeatureRow row = make_row(corpus, cache, bias, d);
      rows.push_back(design_row(row, feature_set, cache.vocab_size));
      targets.push_back(row.target);
    }
    const RegressionModel model = train(rows, targets, width, options.lambda);
    double sse = 0.0;
    for (ReviewId d : test_ids) {
      const FeatureRow row = make_row(corpus, cache, bias, d);
      const double err = row.target - model.predict(design_row(row, feature_set, cache.vocab_size));
      sse += err * err;
    }
    result.per_fold_mse[f] = sse / static_cast<double>(test_ids.size());
  });
  double total = 0.0;
  for (double mse : result.per_fold_mse) total += mse;
  result.mean_mse = total / static_cast<double>(options.folds);
  return result;
}

CvResult cross_validate(const ModelState& state, unsigned feature_set, const CvOptions& options) {
  return cross_validate(state.corpus(), build_cache(state, options.threads), feature_set, options);
}

nlohmann::json to_json(const CvResult& result) {
  return {{"feature_set", feature_set_name(result.feature_set)},
          {"per_fold_mse", result.per_fold_mse},
          {"mean_mse", result.mean_mse},
          {"seed", result.seed}};
}

void write_libsvm(const std::vector<FeatureRow>& rows, unsigned set, std::size_t vocab_size,
                  const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(17);
  for (const auto& row : rows) {
    out << row.target;
    for (const auto& e : design_row(row, set, vocab_size)) out << ' ' << e.index + 1 << ':' << e.value;
    out << '\n';
  }
}

}  // namespace ghostlink::recommend
