#include "ghostlink/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <thread>

#include "ghostlink/error.hpp"
#include "ghostlink/kernels.hpp"

namespace ghostlink {

std::string to_string(Mode mode) {
  return mode == Mode::ghostlink ? "ghostlink" : "author_topic";
}

std::string to_string(Granularity granularity) {
  return granularity == Granularity::per_token ? "per_token" : "per_unique_token";
}

Mode parse_mode(const std::string& text) {
  if (text == "ghostlink") return Mode::ghostlink;
  if (text == "author_topic") return Mode::author_topic;
  throw InvalidArgument("unknown mode '" + text + "' (expected ghostlink or author_topic)");
}

Granularity parse_granularity(const std::string& text) {
  if (text == "per_token") return Granularity::per_token;
  if (text == "per_unique_token") return Granularity::per_unique_token;
  throw InvalidArgument("unknown granularity '" + text +
                        "' (expected per_token or per_unique_token)");
}

std::string to_string(InfluenceRule rule) { return rule == InfluenceRule::max ? "max" : "sum"; }

InfluenceRule parse_influence_rule(const std::string& text) {
  if (text == "max") return InfluenceRule::max;
  if (text == "sum") return InfluenceRule::sum;
  throw InvalidArgument("unknown influence rule '" + text + "' (expected max or sum)");
}

ModelState::ModelState(std::shared_ptr<const Corpus> corpus, HyperParams hyper, Mode mode,
                       Granularity granularity, std::uint64_t seed)
    : corpus_(std::move(corpus)),
      hyper_(hyper),
      mode_(mode),
      granularity_(granularity),
      rng_(seed) {
  if (!corpus_ || corpus_->num_reviews() == 0) throw InvalidArgument("corpus is empty");
  hyper_.validate();
  if (hyper_.K > corpus_->vocab_size()) {
    warnings_.push_back("K = " + std::to_string(hyper_.K) + " exceeds vocabulary size " +
                        std::to_string(corpus_->vocab_size()));
  }

  const auto& reviews = corpus_->reviews();
  slot_begin_.reserve(reviews.size() + 1);
  review_mass_.reserve(reviews.size());
  for (const Review& r : reviews) {
    slot_begin_.push_back(slot_word_.size());
    review_mass_.push_back(static_cast<std::int32_t>(r.tokens.size()));
    if (granularity_ == Granularity::per_token) {
      for (WordId w : r.tokens) {
        slot_word_.push_back(w);
        slot_count_.push_back(1);
        slot_review_.push_back(r.id);
      }
    } else {
      for (const UniqueToken& t : r.unique_tokens) {
        slot_word_.push_back(t.word);
        slot_count_.push_back(t.count);
        slot_review_.push_back(r.id);
      }
    }
  }
  slot_begin_.push_back(slot_word_.size());
  scratch_.resize(hyper_.K);

  const std::size_t n = slot_word_.size();
  std::vector<std::uint32_t> z(n);
  for (auto& zi : z) zi = static_cast<std::uint32_t>(uniform_index(rng_, hyper_.K));
  assign(std::vector<std::uint8_t>(n, 0), std::vector<std::int32_t>(n, kNoInfluencer),
         std::move(z));
}

std::span<const ReviewId> ModelState::candidates(ReviewId d) const {
  auto view = corpus_->influence_view(d);
  if (candidate_cap_ && view.size() > *candidate_cap_) {
    view = view.last(*candidate_cap_);
  }
  return view;
}

void ModelState::assign(std::vector<std::uint8_t> s, std::vector<std::int32_t> v,
                        std::vector<std::uint32_t> z) {
  const std::size_t n = slot_word_.size();
  if (s.size() != n || v.size() != n || z.size() != n) {
    throw InvalidArgument("assignment arrays must match the slot count");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (z[i] >= hyper_.K) throw InvalidArgument("facet assignment out of range");
    if (s[i] > 1) throw InvalidArgument("influence flag must be 0 or 1");
    if ((s[i] == 0) != (v[i] == kNoInfluencer)) {
      throw InvalidArgument("influencer must be set exactly when s = 1");
    }
    if (s[i] == 1) {
      if (mode_ == Mode::author_topic) throw InvalidArgument("author_topic mode requires s = 0");
      const ReviewId d = slot_review_[i];
      auto view = corpus_->influence_view(d);
      const auto src = static_cast<ReviewId>(v[i]);
      if (v[i] < 0 || std::find(view.begin(), view.end(), src) == view.end()) {
        throw InvalidArgument("influencer is not in the review's influence view");
      }
      if (corpus_->review(src).user == corpus_->review(d).user) {
        throw InvalidArgument("self-influence is not allowed");
      }
    }
  }
  s_ = std::move(s);
  v_ = std::move(v);
  z_ = std::move(z);
  counts_ = tabulate();
  inv_denom_.assign(hyper_.K, 0.0);
  for (std::uint32_t k = 0; k < hyper_.K; ++k) refresh_inv_denom(k);
}

CountTables ModelState::tabulate() const {
  const std::size_t U = corpus_->num_users();
  const std::size_t K = hyper_.K;
  CountTables t;
  t.num_users = U;
  t.num_facets = K;
  t.user_influence = Matrix<std::int32_t>(U, 2);
  t.user_influencer.assign(U, {});
  t.user_facet_latent = Matrix<std::int32_t>(U, K);
  t.review_facet = Matrix<std::int32_t>(corpus_->num_reviews(), K);
  t.word_facet = Matrix<std::int32_t>(corpus_->vocab_size(), K);
  t.facet_total.assign(K, 0);
  t.influencer_facet = Matrix<std::int32_t>(U, K);
  for (std::size_t i = 0; i < slot_word_.size(); ++i) {
    const auto c = static_cast<std::int32_t>(slot_count_[i]);
    const ReviewId d = slot_review_[i];
    const UserId u = corpus_->review(d).user;
    const std::uint32_t z = z_[i];
    t.user_influence(u, s_[i]) += c;
    if (s_[i] == 1) {
      const UserId src = corpus_->review(static_cast<ReviewId>(v_[i])).user;
      t.user_influencer[u][src] += c;
      t.influencer_facet(src, z) += c;
    } else {
      t.user_facet_latent(u, z) += c;
    }
    t.review_facet(d, z) += c;
    t.word_facet(slot_word_[i], z) += c;
    t.facet_total[z] += c;
  }
  return t;
}

void ModelState::audit() const {
  const CountTables fresh = tabulate();
  if (!(fresh == counts_)) throw Error("count tables differ from a full recount");
  for (std::size_t u = 0; u < counts_.num_users; ++u) {
    std::int64_t influenced = 0;
    for (const auto& [src, n] : counts_.user_influencer[u]) {
      if (n <= 0) throw Error("non-positive influencer count");
      if (src == u) throw Error("self-influence count present");
      influenced += n;
    }
    if (influenced != counts_.user_influence(u, 1)) {
      throw Error("influencer counts do not sum to the influenced token mass");
    }
  }
  for (auto x : counts_.user_influence.data()) {
    if (x < 0) throw Error("negative count");
  }
  for (std::size_t d = 0; d < corpus_->num_reviews(); ++d) {
    std::int64_t mass = 0;
    for (auto x : counts_.review_facet.row(d)) mass += x;
    if (mass != review_mass_[d]) throw Error("review facet counts do not sum to review length");
  }
  for (std::size_t i = 0; i < slot_word_.size(); ++i) {
    if (s_[i] == 0) continue;
    const ReviewId d = slot_review_[i];
    const auto& src = corpus_->review(static_cast<ReviewId>(v_[i]));
    const auto& own = corpus_->review(d);
    if (src.item != own.item || !(src.timestamp < own.timestamp) || src.user == own.user) {
      throw Error("influencer does not precede the token's review on the same item");
    }
  }
}

void ModelState::refresh_inv_denom(std::uint32_t z) {
  inv_denom_[z] = 1.0 / (counts_.facet_total[z] +
                         static_cast<double>(corpus_->vocab_size()) * hyper_.gamma);
}

void ModelState::remove(std::size_t slot) {
  const auto c = static_cast<std::int32_t>(slot_count_[slot]);
  const ReviewId d = slot_review_[slot];
  const UserId u = corpus_->review(d).user;
  const std::uint32_t z = z_[slot];
  counts_.user_influence(u, s_[slot]) -= c;
  if (s_[slot] == 1) {
    const UserId src = corpus_->review(static_cast<ReviewId>(v_[slot])).user;
    auto it = counts_.user_influencer[u].find(src);
    if ((it->second -= c) == 0) counts_.user_influencer[u].erase(it);
    counts_.influencer_facet(src, z) -= c;
  } else {
    counts_.user_facet_latent(u, z) -= c;
  }
  counts_.review_facet(d, z) -= c;
  counts_.word_facet(slot_word_[slot], z) -= c;
  counts_.facet_total[z] -= c;
  refresh_inv_denom(z);
}

void ModelState::add(std::size_t slot) {
  const auto c = static_cast<std::int32_t>(slot_count_[slot]);
  const ReviewId d = slot_review_[slot];
  const UserId u = corpus_->review(d).user;
  const std::uint32_t z = z_[slot];
  counts_.user_influence(u, s_[slot]) += c;
  if (s_[slot] == 1) {
    const UserId src = corpus_->review(static_cast<ReviewId>(v_[slot])).user;
    counts_.user_influencer[u][src] += c;
    counts_.influencer_facet(src, z) += c;
  } else {
    counts_.user_facet_latent(u, z) += c;
  }
  counts_.review_facet(d, z) += c;
  counts_.word_facet(slot_word_[slot], z) += c;
  counts_.facet_total[z] += c;
  refresh_inv_denom(z);
}

ModelState::InfluenceDecision ModelState::resample_influence(std::size_t slot) {
  InfluenceDecision out;
  if (mode_ == Mode::author_topic) {
    s_[slot] = 0;
    v_[slot] = kNoInfluencer;
    return out;
  }
  const ReviewId d = slot_review_[slot];
  const UserId u = corpus_->review(d).user;
  const std::uint32_t z = z_[slot];
  const double K = hyper_.K;
  const double U = static_cast<double>(corpus_->num_users());
  const double n0 = counts_.user_influence(u, 0);
  const double n1 = counts_.user_influence(u, 1);
  const double vulnerability_denom = n0 + n1 + 2.0 * hyper_.eta;

  out.p0 = (n0 + hyper_.eta) / vulnerability_denom *
           (counts_.user_facet_latent(u, z) + hyper_.alpha) / (n0 + K * hyper_.alpha);

  // One scan yields the s = 1 weight and the influencer. Under the max rule
  // the influencer is the review with the largest facet factor; under the sum
  // rule it is the posterior mode, which also weighs earlier copying from
  // that author. Strict comparison keeps the earliest review on ties.
  const auto& copied = counts_.user_influencer[u];
  const double copied_denom = n1 + U * hyper_.rho;
  double best_facet = -1.0;
  double tie_total = 0.0;
  double weighted_facet = 0.0;
  double best_score = -1.0;
  std::int32_t best = kNoInfluencer;
  for (ReviewId cand : candidates(d)) {
    const Review& r = corpus_->review(cand);
    if (r.user == u) continue;
    const double facet = (counts_.review_facet(cand, z) + hyper_.alpha) /
                         (review_mass_[cand] + K * hyper_.alpha);
    auto it = copied.find(r.user);
    const double tie = ((it == copied.end() ? 0 : it->second) + hyper_.rho) / copied_denom;
    const double score = rule_ == InfluenceRule::max ? facet : tie * facet;
    best_facet = std::max(best_facet, facet);
    tie_total += tie;
    weighted_facet += tie * facet;
    if (score > best_score) {
      best_score = score;
      best = static_cast<std::int32_t>(cand);
    }
  }
  if (best == kNoInfluencer) {
    s_[slot] = 0;
    v_[slot] = kNoInfluencer;
    return out;
  }
  const double facet_term = rule_ == InfluenceRule::max ? best_facet : weighted_facet / tie_total;
  out.p1 = (n1 + hyper_.eta) / vulnerability_denom * facet_term;
  const bool influenced = uniform01(rng_) * (out.p0 + out.p1) < out.p1;
  out.s = influenced ? 1 : 0;
  out.v = influenced ? best : kNoInfluencer;
  s_[slot] = out.s;
  v_[slot] = out.v;
  return out;
}

std::uint32_t ModelState::resample_facet(std::size_t slot) {
  const std::size_t K = hyper_.K;
  const ReviewId d = slot_review_[slot];
  const UserId u = corpus_->review(d).user;
  const std::int32_t* pref = s_[slot] == 0
                                 ? counts_.user_facet_latent.row(u).data()
                                 : counts_.review_facet.row(static_cast<ReviewId>(v_[slot])).data();
  const double total = kernels::active().facet_weights(
      pref, hyper_.alpha, counts_.word_facet.row(slot_word_[slot]).data(), hyper_.gamma,
      inv_denom_.data(), scratch_.data(), K);
  const double target = uniform01(rng_) * total;
  double running = 0.0;
  std::uint32_t z = static_cast<std::uint32_t>(K - 1);
  for (std::size_t k = 0; k < K; ++k) {
    running += scratch_[k];
    if (target < running) {
      z = static_cast<std::uint32_t>(k);
      break;
    }
  }
  z_[slot] = z;
  return z;
}

void ModelState::update_slot(std::size_t slot) {
  remove(slot);
  resample_influence(slot);
  resample_facet(slot);
  add(slot);
}

void ModelState::sweep() {
  for (ItemId item = 0; item < corpus_->num_items(); ++item) {
    for (ReviewId d : corpus_->item_reviews(item)) {
      for (std::size_t slot = slot_begin_[d]; slot < slot_begin_[d + 1]; ++slot) {
        update_slot(slot);
      }
    }
  }
  ++iteration_;
}

double ModelState::log_likelihood(unsigned threads) const {
  const std::size_t D = corpus_->num_reviews();
  const std::size_t K = hyper_.K;
  constexpr std::size_t kBlock = 256;
  const std::size_t blocks = (D + kBlock - 1) / kBlock;
  std::vector<double> partial(blocks, 0.0);
  const auto& kt = kernels::active();

  auto work = [&](std::size_t first_block, std::size_t stride) {
    for (std::size_t b = first_block; b < blocks; b += stride) {
      double sum = 0.0;
      const std::size_t end = std::min(D, (b + 1) * kBlock);
      for (std::size_t d = b * kBlock; d < end; ++d) {
        const UserId u = corpus_->review(static_cast<ReviewId>(d)).user;
        for (std::size_t slot = slot_begin_[d]; slot < slot_begin_[d + 1]; ++slot) {
          const std::int32_t* pref;
          double pref_total;
          if (s_[slot] == 0) {
            pref = counts_.user_facet_latent.row(u).data();
            pref_total = counts_.user_influence(u, 0);
          } else {
            const auto src = static_cast<ReviewId>(v_[slot]);
            pref = counts_.review_facet.row(src).data();
            pref_total = review_mass_[src];
          }
          const double mass = kt.facet_mass(pref, hyper_.alpha,
                                            counts_.word_facet.row(slot_word_[slot]).data(),
                                            hyper_.gamma, inv_denom_.data(), K);
          sum += slot_count_[slot] * std::log(mass / (pref_total + K * hyper_.alpha));
        }
      }
      partial[b] = sum;
    }
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(blocks)));
  if (workers <= 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < workers; ++t) pool.emplace_back(work, t, workers);
    for (auto& th : pool) th.join();
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

RunResult run(std::shared_ptr<const Corpus> corpus, const HyperParams& hyper,
              const SamplerConfig& config) {
  RunResult result{ModelState(std::move(corpus), hyper, config.mode, config.granularity,
                              config.seed),
                   {},
                   false};
  ModelState& state = result.state;
  state.set_candidate_cap(config.candidate_cap);
  state.set_influence_rule(config.influence_rule);
  result.ll_trace.push_back(state.log_likelihood(config.threads));
  if (config.on_iteration) config.on_iteration(0, result.ll_trace.back());
  std::uint32_t quiet = 0;
  for (std::uint32_t it = 1; it <= config.max_iters; ++it) {
    state.sweep();
    const double ll = state.log_likelihood(config.threads);
    const double prev = result.ll_trace.back();
    result.ll_trace.push_back(ll);
    if (config.on_iteration) config.on_iteration(it, ll);
    const double rel = std::fabs(ll - prev) / std::max(std::fabs(ll), 1e-300);
    quiet = rel < config.rel_ll_tol ? quiet + 1 : 0;
    if (quiet >= std::max(1u, config.window)) {
      result.converged = true;
      break;
    }
  }
  return result;
}

ExampleInfluenceWeights unsmoothed_influence_weights(const ModelState& state, std::size_t slot) {
  const Corpus& corpus = state.corpus();
  const CountTables& c = state.counts();
  const ReviewId d = state.slot_review(slot);
  const UserId u = corpus.review(d).user;
  const std::uint32_t z = state.z(slot);
  auto ratio = [](double num, double den) { return den == 0.0 ? 0.0 : num / den; };
  const double n0 = c.user_influence(u, 0);
  const double n1 = c.user_influence(u, 1);
  ExampleInfluenceWeights out;
  out.p0 = ratio(n0, n0 + n1) * ratio(c.user_facet_latent(u, z), n0);
  double best = -1.0;
  for (ReviewId cand : corpus.influence_view(d)) {
    const Review& r = corpus.review(cand);
    if (r.user == u) continue;
    double mass = 0.0;
    for (auto x : c.review_facet.row(cand)) mass += x;
    const double p1 = ratio(n1, n0 + n1) * ratio(c.review_facet(cand, z), mass);
    out.p1.emplace_back(cand, p1);
    if (p1 > best) {
      best = p1;
      out.best = static_cast<std::int32_t>(cand);
    }
  }
  return out;
}

}  // namespace ghostlink
