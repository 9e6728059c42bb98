#include <fstream>
#include <sstream>

#include "doctest.h"
#include "ghostlink/cli.hpp"
#include "ghostlink/corpus.hpp"
#include "helpers.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using ghostlink::cli::run;
using nlohmann::json;

namespace {

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome call(std::vector<std::string> args) {
  std::ostringstream out, err;
  Outcome o;
  o.code = run(args, out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += !line.empty();
  return n;
}

json last_json_line(const std::string& text) {
  std::istringstream in(text);
  std::string line, last;
  while (std::getline(in, line))
    if (!line.empty()) last = line;
  return json::parse(last);
}

// Small influence scenario shared by the pipeline tests.
std::vector<std::string> generate_args(const fs::path& dir) {
  return {"generate", "--output", dir.string(), "--users", "20", "--items", "25", "--facets", "3",
          "--vocab", "60", "--leaders", "4", "--mean-length", "12", "--seed", "5"};
}

}  // namespace

TEST_CASE("train with zero iterations on a tiny corpus") {
  auto dir = ghostlink::testing::scratch_dir("cli_tiny");
  auto c = ghostlink::testing::make_corpus({{"a", "m", 0, 3, {"x", "y"}},
                                            {"b", "m", 1, 4, {"x"}},
                                            {"c", "m", 2, 5, {"y", "y"}}});
  ghostlink::save_corpus(c, dir / "corpus");
  auto r = call({"train", "--corpus", (dir / "corpus").string(), "--output", (dir / "model").string(),
                 "-K", "2", "--max-iters", "0"});
  REQUIRE(r.code == 0);
  CHECK(count_lines(dir / "model" / "lltrace.csv") == 2);  // header plus initial state
  auto summary = json::parse(r.out);
  CHECK(summary["iterations"] == 0);
  CHECK(fs::exists(dir / "model" / "run_config.json"));
}

TEST_CASE("generate, train, analyze, rank and predict") {
  auto dir = ghostlink::testing::scratch_dir("cli_pipeline");
  REQUIRE(call(generate_args(dir / "data")).code == 0);
  CHECK(fs::exists(dir / "data" / "ground_truth.json"));
  CHECK(fs::exists(dir / "data" / "planted.tsv"));
  auto t = call({"train", "--corpus", (dir / "data").string(), "--output", (dir / "model").string(), "-K",
                 "3", "--max-iters", "4", "--seed", "2"});
  REQUIRE(t.code == 0);
  CHECK(t.err.find("iteration 1 ll") != std::string::npos);
  auto a = call({"analyze", "--corpus", (dir / "data").string(), "--model", (dir / "model").string(),
                 "--output", (dir / "report").string()});
  REQUIRE(a.code == 0);
  for (const char* f : {"edges.tsv", "profiles.tsv", "divergences.json", "forest.json",
                        "in_degree_hist.csv", "scores.tsv", "report.json"}) {
    CHECK_MESSAGE(fs::exists(dir / "report" / f), f);
  }
  auto rk = call({"rank", "--corpus", (dir / "data").string(), "--model", (dir / "model").string(),
                  "--output", (dir / "rank").string(), "--method", "in_degree"});
  REQUIRE(rk.code == 0);
  auto again = call({"rank", "--corpus", (dir / "data").string(), "--model", (dir / "model").string(),
                     "--output", (dir / "rank2").string(), "--method", "in_degree", "--reference",
                     (dir / "rank" / "ranking.tsv").string()});
  REQUIRE(again.code == 0);
  auto corr = json::parse(slurp(dir / "rank2" / "correlation.json"));
  CHECK(corr["pearson"].get<double>() == doctest::Approx(1.0).epsilon(1e-12));
  auto p = call({"predict", "--corpus", (dir / "data").string(), "--model", (dir / "model").string(),
                 "--output", (dir / "predict").string(), "--folds", "3", "--libsvm"});
  REQUIRE(p.code == 0);
  auto results = json::parse(slurp(dir / "predict" / "results.json"));
  REQUIRE(results.size() == 3);
  CHECK(results[0]["feature_set"] == "F2");
  CHECK(fs::exists(dir / "predict" / "features_F2.libsvm"));
}

TEST_CASE("reruns with the same seed are byte identical") {
  auto dir = ghostlink::testing::scratch_dir("cli_rerun");
  REQUIRE(call(generate_args(dir / "data")).code == 0);
  for (const char* name : {"m1", "m2"}) {
    REQUIRE(call({"train", "--corpus", (dir / "data").string(), "--output", (dir / name).string(), "-K",
                  "3", "--max-iters", "3", "--quiet"})
                .code == 0);
  }
  for (const char* f : {"assignments.bin", "n_zw.tsv", "n_uv.tsv", "lltrace.csv", "rng_state.txt"}) {
    CHECK_MESSAGE(slurp(dir / "m1" / f) == slurp(dir / "m2" / f), f);
  }
}

TEST_CASE("config file supplies values and flags override them") {
  auto dir = ghostlink::testing::scratch_dir("cli_config");
  REQUIRE(call(generate_args(dir / "data")).code == 0);
  {
    std::ofstream cfg(dir / "train.json");
    cfg << json{{"corpus", (dir / "data").string()}, {"K", 2}, {"max_iters", 1}, {"seed", 9}}.dump();
  }
  auto r = call({"train", "--config", (dir / "train.json").string(), "--output", (dir / "model").string(),
                 "--max-iters", "2", "--quiet"});
  REQUIRE(r.code == 0);
  auto used = json::parse(slurp(dir / "model" / "run_config.json"));
  CHECK(used["config"]["K"] == 2);
  CHECK(used["config"]["max_iters"] == 2);
  CHECK(used["config"]["seed"] == 9);
  // A previous run_config.json is itself a valid config.
  auto again = call({"train", "--config", (dir / "model" / "run_config.json").string(), "--output",
                     (dir / "model2").string(), "--quiet"});
  CHECK(again.code == 0);
  CHECK(slurp(dir / "model" / "assignments.bin") == slurp(dir / "model2" / "assignments.bin"));
}

TEST_CASE("usage errors exit with 2 and a structured message") {
  auto r = call({"train", "--bogus"});
  CHECK(r.code == 2);
  auto e = last_json_line(r.err);
  CHECK(e["error"]["exit_code"] == 2);
  CHECK(call({"frobnicate"}).code == 2);
  auto dir = ghostlink::testing::scratch_dir("cli_badcfg");
  {
    std::ofstream cfg(dir / "c.json");
    cfg << R"({"unknown_key": 1})";
  }
  CHECK(call({"train", "--config", (dir / "c.json").string()}).code == 2);
  {
    std::ofstream cfg(dir / "t.json");
    cfg << R"({"K": "many"})";
  }
  CHECK(call({"train", "--config", (dir / "t.json").string()}).code == 2);
  CHECK(call({"train", "--corpus", "x", "--output", "y", "--mode", "lda"}).code == 2);
}

TEST_CASE("missing inputs exit with 3") {
  auto dir = ghostlink::testing::scratch_dir("cli_missing");
  auto r = call({"train", "--corpus", (dir / "nope").string(), "--output", (dir / "m").string()});
  CHECK(r.code == 3);
  CHECK(last_json_line(r.err)["error"]["exit_code"] == 3);
}

TEST_CASE("help exits cleanly") {
  auto r = call({"--help"});
  CHECK(r.code == 0);
  CHECK(r.out.find("train") != std::string::npos);
}
