#include "ghostlink/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <unordered_set>

#include "ghostlink/error.hpp"
#include "json.hpp"

namespace ghostlink {

std::vector<UniqueToken> collapse_tokens(std::span<const WordId> tokens) {
  std::vector<UniqueToken> out;
  std::unordered_map<WordId, std::size_t> slot;
  for (WordId w : tokens) {
    auto [it, inserted] = slot.try_emplace(w, out.size());
    if (inserted) {
      out.push_back({w, 1});
    } else {
      ++out[it->second].count;
    }
  }
  return out;
}

std::vector<std::string> TokenPolicy::default_stopwords() {
  return {"an",   "and",  "are",   "as",   "at",    "be",    "but",  "by",   "for",
          "from", "had",  "has",   "have", "he",    "her",   "his",  "if",   "in",
          "into", "is",   "it",    "its",  "me",    "my",    "of",   "on",   "or",
          "our",  "she",  "so",    "than", "that",  "the",   "their", "them", "then",
          "there", "these", "they", "this", "to",   "was",   "we",   "were", "what",
          "when", "which", "who",  "will", "with",  "you",   "your"};
}

std::vector<std::string> tokenize(std::string_view text, const TokenPolicy& policy) {
  std::unordered_set<std::string_view> stop(policy.stopwords.begin(), policy.stopwords.end());
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    if (current.size() >= policy.min_len && !stop.contains(current)) {
      out.push_back(current);
    }
    current.clear();
  };
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      current.push_back(policy.lowercase ? static_cast<char>(std::tolower(c)) : ch);
    } else {
      flush();
    }
  }
  flush();
  return out;
}

WordId Vocabulary::add(std::string_view word) {
  auto [it, inserted] = index_.try_emplace(std::string(word), static_cast<WordId>(words_.size()));
  if (inserted) words_.emplace_back(word);
  return it->second;
}

std::optional<WordId> Vocabulary::find(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::uint32_t NameTable::intern(std::string_view name) {
  auto [it, inserted] =
      index_.try_emplace(std::string(name), static_cast<std::uint32_t>(names_.size()));
  if (inserted) names_.emplace_back(name);
  return it->second;
}

std::optional<std::uint32_t> NameTable::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Corpus Corpus::build(Vocabulary vocab, NameTable users, NameTable items,
                     std::vector<Review> reviews) {
  Corpus c;
  c.vocab_ = std::move(vocab);
  c.users_ = std::move(users);
  c.items_ = std::move(items);
  c.reviews_ = std::move(reviews);
  c.per_item_.assign(c.items_.size(), {});
  for (std::size_t i = 0; i < c.reviews_.size(); ++i) {
    Review& r = c.reviews_[i];
    if (r.id != i) throw InvalidArgument("review ids must be dense and ordered");
    if (r.user >= c.users_.size()) throw InvalidArgument("review references unknown user");
    if (r.item >= c.items_.size()) throw InvalidArgument("review references unknown item");
    if (r.tokens.empty()) throw InvalidArgument("review has no tokens");
    for (WordId w : r.tokens) {
      if (w >= c.vocab_.size()) throw InvalidArgument("token index out of vocabulary range");
    }
    r.unique_tokens = collapse_tokens(r.tokens);
    c.num_tokens_ += r.tokens.size();
    c.per_item_[r.item].push_back(r.id);
  }
  c.position_.assign(c.reviews_.size(), 0);
  c.view_len_.assign(c.reviews_.size(), 0);
  for (auto& list : c.per_item_) {
    std::sort(list.begin(), list.end(), [&](ReviewId a, ReviewId b) {
      const auto& ra = c.reviews_[a];
      const auto& rb = c.reviews_[b];
      if (ra.timestamp != rb.timestamp) return ra.timestamp < rb.timestamp;
      return a < b;
    });
    // Equal timestamps share a view: only strictly earlier reviews qualify.
    std::size_t group_start = 0;
    for (std::size_t p = 0; p < list.size(); ++p) {
      if (p > 0 && c.reviews_[list[p]].timestamp != c.reviews_[list[p - 1]].timestamp) {
        group_start = p;
      }
      c.position_[list[p]] = static_cast<std::uint32_t>(p);
      c.view_len_[list[p]] = static_cast<std::uint32_t>(group_start);
    }
  }
  return c;
}

std::span<const ReviewId> Corpus::influence_view(ReviewId id) const {
  if (id >= reviews_.size()) throw InvalidArgument("unknown review id " + std::to_string(id));
  const auto& list = per_item_[reviews_[id].item];
  return std::span<const ReviewId>(list).first(view_len_[id]);
}

namespace {

struct RawRecord {
  std::string user;
  std::string item;
  std::int64_t timestamp = 0;
  double rating = 0.0;
  std::vector<std::string> tokens;
};

std::optional<std::string> id_field(const nlohmann::json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) return std::nullopt;
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<std::int64_t>());
  return std::nullopt;
}

std::optional<RawRecord> parse_record(const std::string& line, const TokenPolicy& policy) {
  nlohmann::json obj = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (obj.is_discarded() || !obj.is_object()) return std::nullopt;
  RawRecord rec;
  auto user = id_field(obj, "userId");
  auto item = id_field(obj, "itemId");
  auto ts = obj.find("timestamp");
  auto rating = obj.find("rating");
  auto text = obj.find("review");
  if (!user || !item || ts == obj.end() || rating == obj.end() || text == obj.end()) {
    return std::nullopt;
  }
  if (!ts->is_number_integer() || !rating->is_number() || !text->is_string()) return std::nullopt;
  rec.user = std::move(*user);
  rec.item = std::move(*item);
  rec.timestamp = ts->get<std::int64_t>();
  rec.rating = rating->get<double>();
  rec.tokens = tokenize(text->get_ref<const std::string&>(), policy);
  return rec;
}

}  // namespace

IngestResult ingest_jsonl_lines(std::span<const std::string> lines, const TokenPolicy& policy) {
  IngestReport report;
  std::vector<RawRecord> records;
  std::unordered_map<std::string, std::size_t> freq;
  for (const std::string& line : lines) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++report.lines;
    auto rec = parse_record(line, policy);
    if (!rec) {
      ++report.skipped;
      continue;
    }
    for (const auto& t : rec->tokens) ++freq[t];
    records.push_back(std::move(*rec));
  }
  for (const auto& [word, n] : freq) {
    if (n < policy.min_corpus_frequency) ++report.vocab_dropped;
  }

  Vocabulary vocab;
  NameTable users;
  NameTable items;
  std::vector<Review> reviews;
  for (auto& rec : records) {
    std::vector<std::string_view> kept;
    for (const auto& t : rec.tokens) {
      if (freq[t] >= policy.min_corpus_frequency) kept.push_back(t);
    }
    if (kept.empty()) {
      ++report.empty_after_tokenize;
      continue;
    }
    Review r;
    r.id = static_cast<ReviewId>(reviews.size());
    r.user = users.intern(rec.user);
    r.item = items.intern(rec.item);
    r.timestamp = rec.timestamp;
    r.rating = rec.rating;
    r.tokens.reserve(kept.size());
    for (auto t : kept) r.tokens.push_back(vocab.add(t));
    reviews.push_back(std::move(r));
  }
  report.accepted = reviews.size();
  return {Corpus::build(std::move(vocab), std::move(users), std::move(items), std::move(reviews)),
          report};
}

IngestResult ingest_jsonl(const std::filesystem::path& path, const TokenPolicy& policy) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(std::move(line));
  if (in.bad()) throw IoError("read failure on " + path.string());
  return ingest_jsonl_lines(lines, policy);
}

}  // namespace ghostlink
