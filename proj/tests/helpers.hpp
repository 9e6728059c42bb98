#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "ghostlink/corpus.hpp"

namespace ghostlink::testing {

struct ReviewSpec {
  std::string user;
  std::string item;
  std::int64_t timestamp = 0;
  double rating = 0.0;
  std::vector<std::string> words;
};

inline Corpus make_corpus(const std::vector<ReviewSpec>& specs) {
  Vocabulary vocab;
  NameTable users, items;
  std::vector<Review> reviews;
  for (const auto& s : specs) {
    Review r;
    r.id = static_cast<ReviewId>(reviews.size());
    r.user = users.intern(s.user);
    r.item = items.intern(s.item);
    r.timestamp = s.timestamp;
    r.rating = s.rating;
    for (const auto& w : s.words) r.tokens.push_back(vocab.add(w));
    reviews.push_back(std::move(r));
  }
  return Corpus::build(std::move(vocab), std::move(users), std::move(items), std::move(reviews));
}

inline std::shared_ptr<const Corpus> shared_corpus(const std::vector<ReviewSpec>& specs) {
  return std::make_shared<const Corpus>(make_corpus(specs));
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("ghostlink_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace ghostlink::testing
