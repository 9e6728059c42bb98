#include <fstream>
#include <sstream>

#include "ghostlink/corpus.hpp"
#include "ghostlink/error.hpp"
#include "json.hpp"

namespace ghostlink {

namespace fs = std::filesystem;

namespace {

std::string escape_field(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out;
}

std::string unescape_field(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\' || i + 1 == s.size()) {
      out += s[i];
      continue;
    }
    switch (s[++i]) {
      case 't': out += '\t'; break;
      case 'n': out += '\n'; break;
      case 'r': out += '\r'; break;
      default: out += s[i];
    }
  }
  return out;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write " + p.string());
  return out;
}

std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open " + p.string());
  return in;
}

void write_table(const fs::path& p, const std::vector<std::string>& names) {
  auto out = open_out(p);
  for (std::size_t i = 0; i < names.size(); ++i) out << i << '\t' << escape_field(names[i]) << '\n';
}

// Reads "index\tvalue" rows and checks the indices are 0..n-1 in order.
std::vector<std::string> read_table(const fs::path& p) {
  auto in = open_in(p);
  std::vector<std::string> names;
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw IoError("malformed row in " + p.string());
    if (std::stoull(line.substr(0, tab)) != names.size()) {
      throw IoError("non-sequential index in " + p.string());
    }
    names.push_back(unescape_field(std::string_view(line).substr(tab + 1)));
  }
  return names;
}

}  // namespace

void save_corpus(const Corpus& corpus, const fs::path& dir, const TokenPolicy* policy) {
  fs::create_directories(dir);
  write_table(dir / "vocab.tsv", corpus.vocab().words());
  write_table(dir / "users.tsv", corpus.users().names());
  write_table(dir / "items.tsv", corpus.items().names());
  {
    auto out = open_out(dir / "reviews.jsonl");
    for (const Review& r : corpus.reviews()) {
      nlohmann::json j = {{"id", r.id},         {"user", r.user},     {"item", r.item},
                          {"timestamp", r.timestamp}, {"rating", r.rating}, {"tokens", r.tokens}};
      out << j.dump() << '\n';
    }
  }
  nlohmann::json meta = {{"format_version", kCorpusFormatVersion},
                         {"reviews_format", "reviews.jsonl"},
                         {"num_reviews", corpus.num_reviews()},
                         {"num_users", corpus.num_users()},
                         {"num_items", corpus.num_items()},
                         {"vocab_size", corpus.vocab_size()},
                         {"num_tokens", corpus.num_tokens()}};
  if (policy) {
    meta["tokenizer"] = {{"min_len", policy->min_len},
                         {"min_corpus_frequency", policy->min_corpus_frequency},
                         {"lowercase", policy->lowercase},
                         {"stopwords", policy->stopwords}};
  }
  open_out(dir / "meta.json") << meta.dump(2) << '\n';
}

Corpus load_corpus(const fs::path& dir) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(open_in(dir / "meta.json"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad meta.json in " + dir.string() + ": " + e.what());
  }
  if (meta.value("format_version", 0) != kCorpusFormatVersion) {
    throw IoError("unsupported corpus format version in " + dir.string());
  }
  Vocabulary vocab;
  for (const auto& w : read_table(dir / "vocab.tsv")) vocab.add(w);
  NameTable users;
  for (const auto& n : read_table(dir / "users.tsv")) users.intern(n);
  NameTable items;
  for (const auto& n : read_table(dir / "items.tsv")) items.intern(n);

  std::vector<Review> reviews;
  auto in = open_in(dir / "reviews.jsonl");
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      Review r;
      r.id = j.at("id").get<ReviewId>();
      r.user = j.at("user").get<UserId>();
      r.item = j.at("item").get<ItemId>();
      r.timestamp = j.at("timestamp").get<std::int64_t>();
      r.rating = j.at("rating").get<double>();
      r.tokens = j.at("tokens").get<std::vector<WordId>>();
      reviews.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw IoError("bad review row in " + dir.string() + ": " + e.what());
    }
  }
  if (reviews.size() != meta.value("num_reviews", reviews.size())) {
    throw IoError("review count does not match meta.json in " + dir.string());
  }
  return Corpus::build(std::move(vocab), std::move(users), std::move(items), std::move(reviews));
}

}  // namespace ghostlink
