#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ghostlink {

using UserId = std::uint32_t;
using ItemId = std::uint32_t;
using ReviewId = std::uint32_t;
using WordId = std::uint32_t;

struct UniqueToken {
  WordId word = 0;
  std::uint32_t count = 0;
  bool operator==(const UniqueToken&) const = default;
};

struct Review {
  ReviewId id = 0;
  UserId user = 0;
  ItemId item = 0;
  std::int64_t timestamp = 0;
  double rating = 0.0;
  std::vector<WordId> tokens;
  // Distinct words in order of first occurrence, with multiplicities.
  std::vector<UniqueToken> unique_tokens;
};

/// Builds unique_tokens from tokens, preserving first-occurrence order.
std::vector<UniqueToken> collapse_tokens(std::span<const WordId> tokens);

struct TokenPolicy {
  std::size_t min_len = 2;
  std::size_t min_corpus_frequency = 5;
  bool lowercase = true;
  std::vector<std::string> stopwords = default_stopwords();

  static std::vector<std::string> default_stopwords();
};

/// Lowercases, splits on runs of non-alphanumeric bytes, then drops tokens
/// shorter than min_len and stopwords. The frequency floor is applied later,
/// at corpus build time.
std::vector<std::string> tokenize(std::string_view text, const TokenPolicy& policy);

class Vocabulary {
 public:
  WordId add(std::string_view word);
  std::optional<WordId> find(std::string_view word) const;
  const std::string& word(WordId id) const { return words_.at(id); }
  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, WordId> index_;
};

/// Dense string-to-index interning in first-seen order (users, items).
class NameTable {
 public:
  std::uint32_t intern(std::string_view name);
  std::optional<std::uint32_t> find(std::string_view name) const;
  const std::string& name(std::uint32_t id) const { return names_.at(id); }
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

/// Immutable review collection with per-item temporal ordering.
class Corpus {
 public:
  /// Assembles a corpus from reviews whose ids are 0..n-1 in order. Fills in
  /// unique_tokens and the per-item orderings and validates every id.
  static Corpus build(Vocabulary vocab, NameTable users, NameTable items,
                      std::vector<Review> reviews);

  const std::vector<Review>& reviews() const { return reviews_; }
  const Review& review(ReviewId id) const { return reviews_.at(id); }
  std::size_t num_reviews() const { return reviews_.size(); }
  std::size_t num_users() const { return users_.size(); }
  std::size_t num_items() const { return items_.size(); }
  std::size_t vocab_size() const { return vocab_.size(); }
  std::size_t num_tokens() const { return num_tokens_; }

  const Vocabulary& vocab() const { return vocab_; }
  const NameTable& users() const { return users_; }
  const NameTable& items() const { return items_; }

  /// Review ids on an item sorted ascending by (timestamp, review id).
  std::span<const ReviewId> item_reviews(ItemId item) const { return per_item_.at(item); }

  /// Reviews on the same item with a strictly earlier timestamp. Always a
  /// prefix of item_reviews(). Throws InvalidArgument for an unknown id.
  std::span<const ReviewId> influence_view(ReviewId id) const;

  /// Position of a review inside item_reviews(review.item).
  std::size_t position_in_item(ReviewId id) const { return position_.at(id); }

 private:
  Vocabulary vocab_;
  NameTable users_;
  NameTable items_;
  std::vector<Review> reviews_;
  std::vector<std::vector<ReviewId>> per_item_;
  std::vector<std::uint32_t> position_;
  std::vector<std::uint32_t> view_len_;
  std::size_t num_tokens_ = 0;
};

struct IngestReport {
  std::size_t lines = 0;
  std::size_t accepted = 0;
  std::size_t skipped = 0;           // malformed or missing fields
  std::size_t empty_after_tokenize = 0;
  std::size_t vocab_dropped = 0;     // distinct words below the frequency floor
};

struct IngestResult {
  Corpus corpus;
  IngestReport report;
};

/// Reads JSON-lines records {userId, itemId, timestamp, rating, review}.
IngestResult ingest_jsonl(const std::filesystem::path& path, const TokenPolicy& policy = {});

/// Same as ingest_jsonl but over an in-memory stream of lines.
IngestResult ingest_jsonl_lines(std::span<const std::string> lines, const TokenPolicy& policy = {});

inline constexpr int kCorpusFormatVersion = 1;

/// Writes vocab.tsv, users.tsv, items.tsv, reviews.jsonl and meta.json.
void save_corpus(const Corpus& corpus, const std::filesystem::path& dir,
                 const TokenPolicy* policy = nullptr);
Corpus load_corpus(const std::filesystem::path& dir);

}  // namespace ghostlink
