#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "ghostlink/cli.hpp"
#include "ghostlink/corpus.hpp"
#include "ghostlink/error.hpp"
#include "ghostlink/network.hpp"
#include "ghostlink/recommend.hpp"
#include "ghostlink/sampler.hpp"
#include "ghostlink/synth.hpp"
#include "json.hpp"

namespace ghostlink::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

enum class Kind { Int, Double, String, Bool, StringList };

struct OptionSpec {
  std::string key;
  Kind kind;
  json fallback;  // null: unset
  std::string help;
};

struct Context {
  const json& cfg;
  std::ostream& out;
  std::ostream& err;
};

struct Command {
  std::string name;
  std::string description;
  std::vector<OptionSpec> options;
  std::vector<std::string> required;
  std::function<void(Context&)> handler;
};

unsigned default_threads() {
  if (const char* env = std::getenv("GHOSTLINK_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && n >= 1) return static_cast<unsigned>(n);
  }
  return 1;
}

std::string flag_name(const std::string& key) {
  std::string name = key;
  std::replace(name.begin(), name.end(), '_', '-');
  return "--" + name;
}

json parse_scalar(const OptionSpec& spec, const std::string& text) {
  try {
    std::size_t used = 0;
    switch (spec.kind) {
      case Kind::Int: {
        const long long v = std::stoll(text, &used);
        if (used != text.size()) break;
        return v;
      }
      case Kind::Double: {
        const double v = std::stod(text, &used);
        if (used != text.size()) break;
        return v;
      }
      case Kind::String:
        return text;
      default:
        break;
    }
  } catch (const std::exception&) {
  }
  throw InvalidArgument("bad value '" + text + "' for " + flag_name(spec.key));
}

void check_type(const OptionSpec& spec, const json& value) {
  if (value.is_null()) return;
  bool ok = false;
  switch (spec.kind) {
    case Kind::Int: ok = value.is_number_integer(); break;
    case Kind::Double: ok = value.is_number(); break;
    case Kind::String: ok = value.is_string(); break;
    case Kind::Bool: ok = value.is_boolean(); break;
    case Kind::StringList:
      ok = value.is_array() && std::all_of(value.begin(), value.end(),
                                           [](const json& x) { return x.is_string(); });
      break;
  }
  if (!ok) throw InvalidArgument("config key '" + spec.key + "' has the wrong type");
}

json read_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidArgument("config " + path.string() + " is not valid JSON: " + e.what());
  }
  // A run_config.json written by a previous run nests the values under "config".
  if (doc.is_object() && doc.contains("config") && doc["config"].is_object()) doc = doc["config"];
  if (!doc.is_object()) throw InvalidArgument("config must be a JSON object");
  return doc;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const json& value) { write_text(path, value.dump(2) + "\n"); }

void write_run_config(const fs::path& dir, const std::string& command, const json& cfg) {
  fs::create_directories(dir);
  write_json(dir / "run_config.json", {{"command", command}, {"config", cfg}});
}

std::string str(const json& cfg, const char* key) { return cfg.at(key).get<std::string>(); }

template <typename T>
T num(const json& cfg, const char* key) {
  return cfg.at(key).get<T>();
}

template <typename T>
T positive(const json& cfg, const char* key) {
  const auto v = cfg.at(key).get<long long>();
  if (v < 1) throw InvalidArgument(std::string(key) + " must be at least 1");
  return static_cast<T>(v);
}

template <typename T>
T non_negative(const json& cfg, const char* key) {
  const auto v = cfg.at(key).get<long long>();
  if (v < 0) throw InvalidArgument(std::string(key) + " must be non-negative");
  return static_cast<T>(v);
}

std::shared_ptr<const Corpus> open_corpus(const json& cfg) {
  return std::make_shared<const Corpus>(load_corpus(str(cfg, "corpus")));
}

// ---------------------------------------------------------------- ingest

void cmd_ingest(Context& ctx) {
  const json& cfg = ctx.cfg;
  TokenPolicy policy;
  policy.min_len = non_negative<std::size_t>(cfg, "min_len");
  policy.min_corpus_frequency = non_negative<std::size_t>(cfg, "min_frequency");
  policy.lowercase = cfg.at("lowercase").get<bool>();
  if (!cfg.at("stopwords").is_null()) {
    std::ifstream in(str(cfg, "stopwords"));
    if (!in) throw IoError("cannot open stopword list " + str(cfg, "stopwords"));
    policy.stopwords.clear();
    for (std::string word; std::getline(in, word);) {
      if (!word.empty()) policy.stopwords.push_back(word);
    }
  }
  auto result = ingest_jsonl(str(cfg, "input"), policy);
  const fs::path dir = str(cfg, "output");
  save_corpus(result.corpus, dir, &policy);
  const auto& r = result.report;
  json report = {{"lines", r.lines},
                 {"accepted", r.accepted},
                 {"skipped", r.skipped},
                 {"empty_after_tokenize", r.empty_after_tokenize},
                 {"vocab_dropped", r.vocab_dropped}};
  write_json(dir / "ingest_report.json", report);
  write_run_config(dir, "ingest", cfg);
  const Corpus& c = result.corpus;
  ctx.out << json{{"reviews", c.num_reviews()},
                  {"users", c.num_users()},
                  {"items", c.num_items()},
                  {"vocab", c.vocab_size()},
                  {"tokens", c.num_tokens()},
                  {"report", report}}
                 .dump()
          << '\n';
}

// ---------------------------------------------------------------- generate

void cmd_generate(Context& ctx) {
  const json& cfg = ctx.cfg;
  synth::ScenarioConfig sc;
  sc.num_users = positive<std::size_t>(cfg, "users");
  sc.num_items = positive<std::size_t>(cfg, "items");
  sc.num_facets = positive<std::uint32_t>(cfg, "facets");
  sc.vocab_size = positive<std::size_t>(cfg, "vocab");
  sc.num_leaders = positive<std::size_t>(cfg, "leaders");
  sc.leaders_per_item = non_negative<std::size_t>(cfg, "leaders_per_item");
  sc.follow_probability = num<double>(cfg, "follow_probability");
  sc.random_reviewers_per_item = non_negative<std::size_t>(cfg, "random_reviewers_per_item");
  sc.mean_length = positive<std::uint32_t>(cfg, "mean_length");
  sc.dominant_mass = num<double>(cfg, "dominant_mass");
  sc.pi_mean = num<double>(cfg, "pi_mean");
  sc.pi_concentration = num<double>(cfg, "pi_concentration");
  sc.leader_pi = num<double>(cfg, "leader_pi");
  sc.theta_alpha = num<double>(cfg, "theta_alpha");
  sc.beta_gamma = num<double>(cfg, "beta_gamma");
  sc.sentiment_spread = num<double>(cfg, "sentiment_spread");
  synth::RatingModel ratings;
  ratings.noise_sd = num<double>(cfg, "noise_sd");
  ratings.copy_influencer = cfg.at("copy_influencer").get<bool>();
  ratings.sentiment_weight = num<double>(cfg, "sentiment_weight");
  const auto seed = num<std::uint64_t>(cfg, "seed");

  const auto scenario = synth::make_scenario(sc, seed);
  auto gen = synth::generate(scenario.params, scenario.schedule, seed + 1, ratings);
  const fs::path dir = str(cfg, "output");
  save_corpus(gen.corpus, dir);
  synth::save_ground_truth(scenario.params, gen.truth, dir / "ground_truth.json");
  {
    std::ostringstream planted;
    planted << "user\tplanted_influencer\n";
    for (std::size_t u = 0; u < scenario.planted_influencer.size(); ++u) {
      const auto p = scenario.planted_influencer[u];
      planted << gen.corpus.users().name(static_cast<UserId>(u)) << '\t'
              << (p < 0 ? std::string("-") : gen.corpus.users().name(static_cast<UserId>(p)))
              << '\n';
    }
    write_text(dir / "planted.tsv", planted.str());
  }
  write_run_config(dir, "generate", cfg);
  ctx.out << json{{"reviews", gen.corpus.num_reviews()},
                  {"users", gen.corpus.num_users()},
                  {"items", gen.corpus.num_items()},
                  {"tokens", gen.corpus.num_tokens()}}
                 .dump()
          << '\n';
}

// ---------------------------------------------------------------- train

HyperParams hyper_from(const json& cfg, std::size_t num_users) {
  HyperParams h = HyperParams::defaults(positive<std::uint32_t>(cfg, "K"), num_users);
  if (!cfg.at("alpha").is_null()) h.alpha = num<double>(cfg, "alpha");
  if (!cfg.at("rho").is_null()) h.rho = num<double>(cfg, "rho");
  h.eta = num<double>(cfg, "eta");
  h.gamma = num<double>(cfg, "gamma");
  h.validate();
  return h;
}

void cmd_train(Context& ctx) {
  const json& cfg = ctx.cfg;
  SamplerConfig sc;
  sc.max_iters = non_negative<std::uint32_t>(cfg, "max_iters");
  sc.rel_ll_tol = num<double>(cfg, "tol");
  sc.window = positive<std::uint32_t>(cfg, "window");
  sc.seed = num<std::uint64_t>(cfg, "seed");
  sc.mode = parse_mode(str(cfg, "mode"));
  sc.granularity = parse_granularity(str(cfg, "granularity"));
  sc.influence_rule = parse_influence_rule(str(cfg, "influence_rule"));
  if (!cfg.at("candidate_cap").is_null()) sc.candidate_cap = positive<std::uint32_t>(cfg, "candidate_cap");
  sc.threads = positive<unsigned>(cfg, "threads");
  if (!(sc.rel_ll_tol >= 0.0)) throw InvalidArgument("tol must be non-negative");
  const bool quiet = cfg.at("quiet").get<bool>();
  std::ostream& err = ctx.err;
  if (!quiet) {
    sc.on_iteration = [&err](std::uint32_t it, double ll) {
      err << "iteration " << it << " ll " << std::setprecision(12) << ll << '\n';
    };
  }

  auto corpus = open_corpus(cfg);
  const HyperParams h = hyper_from(cfg, corpus->num_users());
  const fs::path dir = str(cfg, "output");
  write_run_config(dir, "train", cfg);
  RunResult result = run(corpus, h, sc);
  for (const auto& w : result.state.warnings()) err << "warning: " << w << '\n';
  save_model(result.state, result.ll_trace, dir);
  ctx.out << json{{"iterations", result.ll_trace.size() - 1},
                  {"converged", result.converged},
                  {"final_ll", result.ll_trace.back()},
                  {"warnings", result.state.warnings()}}
                 .dump()
          << '\n';
}

// ---------------------------------------------------------------- analyze

network::EdgeFilter edge_filter(const json& cfg) {
  network::EdgeFilter f;
  f.min_count = static_cast<std::int32_t>(non_negative<long long>(cfg, "min_count"));
  f.min_weight = num<double>(cfg, "min_weight");
  return f;
}

network::PowerOptions power_options(const json& cfg) {
  network::PowerOptions p;
  p.teleport = num<double>(cfg, "teleport");
  p.tol = num<double>(cfg, "tol");
  p.max_iter = positive<std::uint32_t>(cfg, "max_iter");
  if (!(p.teleport >= 0.0)) throw InvalidArgument("teleport must be non-negative");
  return p;
}

json forest_json(const network::ForestReport& f) {
  return {{"forest_mass", f.forest_mass},        {"graph_mass", f.graph_mass},
          {"forest_edge_count", f.forest_edge_count}, {"graph_edge_count", f.graph_edge_count},
          {"edge_fraction", f.edge_fraction},    {"mass_fraction", f.mass_fraction}};
}

void write_scores(const fs::path& path, const NameTable& users,
                  const std::vector<std::pair<std::string, const std::vector<double>*>>& columns) {
  std::ostringstream s;
  s << "user";
  for (const auto& c : columns) s << '\t' << c.first;
  s << '\n' << std::setprecision(17);
  for (std::size_t u = 0; u < users.size(); ++u) {
    s << users.name(static_cast<UserId>(u));
    for (const auto& c : columns) s << '\t' << (*c.second)[u];
    s << '\n';
  }
  write_text(path, s.str());
}

void cmd_analyze(Context& ctx) {
  const json& cfg = ctx.cfg;
  const auto filter = edge_filter(cfg);
  const auto power = power_options(cfg);
  const auto min_follow = static_cast<std::int32_t>(positive<long long>(cfg, "min_follow"));
  const auto bins = positive<std::size_t>(cfg, "bins_per_decade");
  const bool branching = cfg.at("branching").get<bool>();

  auto corpus = open_corpus(cfg);
  const ModelState state = load_model(corpus, str(cfg, "model"));
  const fs::path dir = str(cfg, "output");
  write_run_config(dir, "analyze", cfg);
  const NameTable& users = corpus->users();

  const auto psi = network::influence_matrix(state);
  const auto graph = network::build_graph(psi, filter);
  network::write_edges_tsv(graph, users, dir / "edges.tsv");
  {
    std::ostringstream s;
    s << "facet\tsrc\tdst\tcount\n";
    for (const auto& e : network::facet_edges(state)) {
      s << e.facet << '\t' << users.name(e.src) << '\t' << users.name(e.dst) << '\t' << e.count << '\n';
    }
    write_text(dir / "facet_edges.tsv", s.str());
  }

  const auto profiles = network::facet_profiles(state);
  network::write_profiles_tsv(profiles, users, dir / "profiles.tsv");
  const auto div = network::mean_divergences(profiles);
  json divergences = {{"observed_vs_latent", div.observed_vs_latent},
                      {"latent_vs_influencer", div.latent_vs_influencer},
                      {"observed_vs_influencer", div.observed_vs_influencer}};
  write_json(dir / "divergences.json", divergences);

  const auto forest = branching ? network::max_branching(graph) : network::mwsf(graph);
  json forest_report = forest_json(forest);
  forest_report["method"] = branching ? "max_branching" : "mwsf";
  write_json(dir / "forest.json", forest_report);
  network::write_edges_tsv({graph.num_nodes, forest.edges}, users, dir / "forest_edges.tsv");

  const auto degree = network::degree_stats(graph);
  network::write_histogram_csv(network::log_histogram(degree.in, bins), dir / "in_degree_hist.csv");
  network::write_histogram_csv(network::log_histogram(degree.out, bins), dir / "out_degree_hist.csv");

  json report = {{"graph",
                  {{"nodes", graph.num_nodes},
                   {"edges", graph.edges.size()},
                   {"total_weight", graph.total_weight()}}},
                 {"forest", forest_report},
                 {"divergences", divergences}};
  std::vector<std::pair<std::string, const std::vector<double>*>> columns = {
      {"in_degree", &degree.in}, {"out_degree", &degree.out}};
  network::CentralityResult eig;
  network::HitsResult h;
  if (graph.edges.empty()) {
    ctx.err << "warning: influence graph has no edges; centrality and HITS skipped\n";
    report["centrality"] = nullptr;
    report["hits"] = nullptr;
  } else {
    eig = network::eigenvector_centrality(graph, power);
    h = network::hits(graph, power);
    report["centrality"] = {{"iterations", eig.iterations}, {"converged", eig.converged}};
    report["hits"] = {{"iterations", h.iterations}, {"converged", h.converged}};
    columns.push_back({"eigenvector", &eig.scores});
    columns.push_back({"hub", &h.hub});
    columns.push_back({"authority", &h.authority});
    network::write_histogram_csv(network::log_histogram(eig.scores, bins), dir / "eigenvector_hist.csv");
    network::write_histogram_csv(network::log_histogram(h.hub, bins), dir / "hub_hist.csv");
    network::write_histogram_csv(network::log_histogram(h.authority, bins), dir / "authority_hist.csv");
  }
  write_scores(dir / "scores.tsv", users, columns);

  const auto coreview = network::coreview_graph(*corpus, min_follow);
  network::write_edges_tsv(coreview, users, dir / "coreview_edges.tsv");
  report["coreview"] = {{"edges", coreview.edges.size()}, {"min_follow", min_follow}};
  write_json(dir / "report.json", report);
  ctx.out << report.dump() << '\n';
}

// ---------------------------------------------------------------- rank

std::map<std::string, double> read_reference(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open reference ranking " + path.string());
  std::map<std::string, double> ref;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, '\t');) fields.push_back(f);
    if (fields.size() < 2) throw IoError("reference line needs user and score: " + line);
    const std::string& user = fields.size() >= 3 ? fields[1] : fields[0];
    const std::string& score = fields.size() >= 3 ? fields[2] : fields[1];
    char* end = nullptr;
    const double value = std::strtod(score.c_str(), &end);
    if (end == score.c_str() || *end != '\0') {
      if (first) {
        first = false;
        continue;  // header
      }
      throw IoError("bad score in reference line: " + line);
    }
    first = false;
    ref[user] = value;
  }
  return ref;
}

void cmd_rank(Context& ctx) {
  const json& cfg = ctx.cfg;
  const std::string method = str(cfg, "method");
  const auto filter = edge_filter(cfg);
  const auto power = power_options(cfg);
  auto corpus = open_corpus(cfg);
  const NameTable& users = corpus->users();

  std::vector<double> scores;
  if (method == "coreview") {
    const auto g = network::coreview_graph(*corpus, static_cast<std::int32_t>(positive<long long>(cfg, "min_follow")));
    scores = network::eigenvector_centrality(g, power).scores;
  } else {
    if (cfg.at("model").is_null()) throw InvalidArgument("--model is required for method " + method);
    const ModelState state = load_model(corpus, str(cfg, "model"));
    const auto graph = network::build_graph(network::influence_matrix(state), filter);
    if (method == "eigenvector") {
      scores = network::eigenvector_centrality(graph, power).scores;
    } else if (method == "hub" || method == "authority") {
      auto h = network::hits(graph, power);
      scores = method == "hub" ? h.hub : h.authority;
    } else if (method == "in_degree" || method == "out_degree") {
      auto d = network::degree_stats(graph);
      scores = method == "in_degree" ? d.in : d.out;
    } else {
      throw InvalidArgument("unknown rank method '" + method + "'");
    }
  }

  std::vector<UserId> order(scores.size());
  for (std::size_t u = 0; u < order.size(); ++u) order[u] = static_cast<UserId>(u);
  std::stable_sort(order.begin(), order.end(), [&](UserId a, UserId b) { return scores[a] > scores[b]; });

  const fs::path dir = str(cfg, "output");
  write_run_config(dir, "rank", cfg);
  {
    std::ostringstream s;
    s << "rank\tuser\tscore\n" << std::setprecision(17);
    for (std::size_t r = 0; r < order.size(); ++r) {
      s << r + 1 << '\t' << users.name(order[r]) << '\t' << scores[order[r]] << '\n';
    }
    write_text(dir / "ranking.tsv", s.str());
  }
  json summary = {{"method", method}, {"users", order.size()}};
  std::size_t top = order.size();
  if (!cfg.at("top").is_null()) top = std::min(top, positive<std::size_t>(cfg, "top"));
  json top_list = json::array();
  for (std::size_t r = 0; r < top; ++r) top_list.push_back({{"user", users.name(order[r])}, {"score", scores[order[r]]}});
  summary["top"] = top_list;

  if (!cfg.at("reference").is_null()) {
    const auto ref = read_reference(str(cfg, "reference"));
    std::vector<double> a, b;
    for (std::size_t u = 0; u < scores.size(); ++u) {
      auto it = ref.find(users.name(static_cast<UserId>(u)));
      if (it == ref.end()) continue;
      a.push_back(scores[u]);
      b.push_back(it->second);
    }
    json correlation = {{"method", method},
                        {"reference", str(cfg, "reference")},
                        {"pairs", a.size()},
                        {"pearson", network::pearson(a, b)}};
    write_json(dir / "correlation.json", correlation);
    summary["correlation"] = correlation;
  }
  ctx.out << summary.dump() << '\n';
}

// ---------------------------------------------------------------- predict

void cmd_predict(Context& ctx) {
  const json& cfg = ctx.cfg;
  recommend::CvOptions options;
  options.folds = positive<std::uint32_t>(cfg, "folds");
  options.seed = num<std::uint64_t>(cfg, "seed");
  options.lambda = num<double>(cfg, "lambda");
  options.threads = positive<unsigned>(cfg, "threads");
  std::vector<unsigned> sets;
  for (const auto& f : cfg.at("features")) sets.push_back(recommend::parse_feature_set(f.get<std::string>()));
  if (sets.empty()) throw InvalidArgument("at least one feature set is required");

  auto corpus = open_corpus(cfg);
  const ModelState state = load_model(corpus, str(cfg, "model"));
  const fs::path dir = str(cfg, "output");
  write_run_config(dir, "predict", cfg);
  const auto cache = recommend::build_cache(state, options.threads);
  json results = json::array();
  for (unsigned set : sets) {
    const auto r = recommend::cross_validate(*corpus, cache, set, options);
    ctx.err << recommend::feature_set_name(set) << " mean_mse " << std::setprecision(10) << r.mean_mse << '\n';
    results.push_back(recommend::to_json(r));
  }
  write_json(dir / "results.json", results);

  if (cfg.at("libsvm").get<bool>()) {
    std::vector<ReviewId> all(corpus->num_reviews());
    for (std::size_t d = 0; d < all.size(); ++d) all[d] = static_cast<ReviewId>(d);
    const auto bias = recommend::f2_statistics(*corpus, all);
    std::vector<recommend::FeatureRow> rows;
    rows.reserve(all.size());
    for (ReviewId d : all) rows.push_back(recommend::make_row(*corpus, cache, bias, d));
    for (unsigned set : sets) {
      std::string name = recommend::feature_set_name(set);
      std::replace(name.begin(), name.end(), '+', '_');
      recommend::write_libsvm(rows, set, cache.vocab_size, dir / ("features_" + name + ".libsvm"));
    }
  }
  ctx.out << results.dump() << '\n';
}

// ---------------------------------------------------------------- table

std::vector<Command> commands() {
  const json threads = default_threads();
  const std::vector<OptionSpec> power = {
      {"teleport", Kind::Double, 1e-3, "Teleport mass for eigenvector centrality"},
      {"tol", Kind::Double, 1e-8, "L1 convergence tolerance for power iterations"},
      {"max_iter", Kind::Int, 1000, "Iteration cap for power iterations"},
      {"min_count", Kind::Int, 1, "Keep edge v->u only if n(u,v,s=1) >= this"},
      {"min_weight", Kind::Double, 0.0, "Keep edge v->u only if psi(u,v) > this"},
      {"min_follow", Kind::Int, 5, "Co-review baseline: minimum shared items"},
  };
  auto with = [](std::vector<OptionSpec> base, const std::vector<OptionSpec>& extra) {
    base.insert(base.end(), extra.begin(), extra.end());
    return base;
  };

  std::vector<Command> list;
  list.push_back({"ingest",
                  "Tokenize a JSON-lines review dump into a corpus snapshot",
                  {{"input", Kind::String, nullptr, "JSON-lines review file"},
                   {"output", Kind::String, nullptr, "Corpus directory to write"},
                   {"min_len", Kind::Int, 2, "Drop tokens shorter than this"},
                   {"min_frequency", Kind::Int, 5, "Drop words with fewer corpus occurrences"},
                   {"lowercase", Kind::Bool, true, "Lowercase text before splitting"},
                   {"stopwords", Kind::String, nullptr, "File with one stopword per line (replaces the default list)"}},
                  {"input", "output"},
                  cmd_ingest});
  list.push_back({"generate",
                  "Simulate a corpus with planted influencers",
                  {{"output", Kind::String, nullptr, "Directory for the corpus and ground truth"},
                   {"seed", Kind::Int, 1, "Random seed"},
                   {"users", Kind::Int, 100, "Number of users"},
                   {"items", Kind::Int, 200, "Number of items"},
                   {"facets", Kind::Int, 5, "Number of facets"},
                   {"vocab", Kind::Int, 500, "Vocabulary size"},
                   {"leaders", Kind::Int, 20, "Users acting as planted influencers"},
                   {"leaders_per_item", Kind::Int, 2, "Leaders reviewing each item early"},
                   {"follow_probability", Kind::Double, 0.6, "Chance a follower reviews an item its leader reviewed"},
                   {"random_reviewers_per_item", Kind::Int, 3, "Extra reviewers per item"},
                   {"mean_length", Kind::Int, 40, "Mean review length in tokens"},
                   {"dominant_mass", Kind::Double, 0.85, "psi mass on the planted influencer"},
                   {"pi_mean", Kind::Double, 0.4, "Mean influence vulnerability"},
                   {"pi_concentration", Kind::Double, 10.0, "Beta concentration of vulnerability"},
                   {"leader_pi", Kind::Double, -1.0, "Fixed leader vulnerability (negative: draw)"},
                   {"theta_alpha", Kind::Double, 0.2, "Dirichlet concentration of facet preferences"},
                   {"beta_gamma", Kind::Double, 0.05, "Dirichlet concentration of facet-word distributions"},
                   {"sentiment_spread", Kind::Double, 1.0, "Spread of per-facet rating sentiment"},
                   {"noise_sd", Kind::Double, 0.1, "Rating noise standard deviation"},
                   {"copy_influencer", Kind::Bool, true, "Influenced reviews copy the source rating"},
                   {"sentiment_weight", Kind::Double, 0.0, "Weight of facet sentiment in ratings"}},
                  {"output"},
                  cmd_generate});
  list.push_back({"train",
                  "Fit the influence-facet model by collapsed Gibbs sampling",
                  {{"corpus", Kind::String, nullptr, "Corpus directory"},
                   {"output", Kind::String, nullptr, "Model directory to write"},
                   {"K", Kind::Int, 20, "Number of facets"},
                   {"alpha", Kind::Double, nullptr, "Facet preference prior (default 1/K)"},
                   {"eta", Kind::Double, 0.5, "Influence vulnerability prior"},
                   {"rho", Kind::Double, nullptr, "Influencer choice prior (default 1/U)"},
                   {"gamma", Kind::Double, 0.01, "Facet-word prior"},
                   {"max_iters", Kind::Int, 50, "Maximum Gibbs sweeps"},
                   {"tol", Kind::Double, 1e-4, "Relative log-likelihood change for convergence"},
                   {"window", Kind::Int, 3, "Consecutive sweeps below tol before stopping"},
                   {"seed", Kind::Int, 1, "Random seed"},
                   {"mode", Kind::String, "ghostlink", "ghostlink or author_topic"},
                   {"granularity", Kind::String, "per_token", "per_token or per_unique_token"},
                   {"influence_rule", Kind::String, "max", "Aggregate s = 1 evidence over candidates by max or sum"},
                   {"candidate_cap", Kind::Int, nullptr, "Scan only the latest N earlier reviews"},
                   {"threads", Kind::Int, threads, "Worker threads (default GHOSTLINK_THREADS or 1)"},
                   {"quiet", Kind::Bool, false, "Suppress per-iteration progress"}},
                  {"corpus", "output"},
                  cmd_train});
  list.push_back({"analyze",
                  "Export the influence graph, profiles, forest, divergences and centralities",
                  with({{"corpus", Kind::String, nullptr, "Corpus directory"},
                        {"model", Kind::String, nullptr, "Model directory"},
                        {"output", Kind::String, nullptr, "Directory for reports"},
                        {"branching", Kind::Bool, false, "Use a directed maximum branching instead of the undirected forest"},
                        {"bins_per_decade", Kind::Int, 5, "Histogram resolution"},
                        {"threads", Kind::Int, threads, "Worker threads"}},
                       power),
                  {"corpus", "model", "output"},
                  cmd_analyze});
  list.push_back({"rank",
                  "Rank users by influence and optionally correlate with a reference",
                  with({{"corpus", Kind::String, nullptr, "Corpus directory"},
                        {"model", Kind::String, nullptr, "Model directory (not needed for coreview)"},
                        {"output", Kind::String, nullptr, "Directory for the ranking"},
                        {"method", Kind::String, "eigenvector", "eigenvector, hub, authority, in_degree, out_degree or coreview"},
                        {"reference", Kind::String, nullptr, "TSV of user and score to correlate against"},
                        {"top", Kind::Int, nullptr, "Users listed in the stdout summary"}},
                       power),
                  {"corpus", "output"},
                  cmd_rank});
  list.push_back({"predict",
                  "Cross-validate rating prediction with F1/F2/F3 features",
                  {{"corpus", Kind::String, nullptr, "Corpus directory"},
                   {"model", Kind::String, nullptr, "Model directory"},
                   {"output", Kind::String, nullptr, "Directory for results"},
                   {"features", Kind::StringList, json::array({"F2", "F2+F3", "F1+F2+F3"}), "Feature sets to evaluate"},
                   {"folds", Kind::Int, 10, "Cross-validation folds"},
                   {"seed", Kind::Int, 1, "Fold assignment seed"},
                   {"lambda", Kind::Double, 1.0, "Ridge penalty"},
                   {"libsvm", Kind::Bool, false, "Also export libSVM feature files"},
                   {"threads", Kind::Int, threads, "Worker threads"}},
                  {"corpus", "model", "output"},
                  cmd_predict});
  return list;
}

struct Failure {
  int code;
  std::string kind;
};

void report_error(std::ostream& err, const Failure& f, const std::string& message) {
  err << json{{"error", {{"kind", f.kind}, {"message", message}, {"exit_code", f.code}}}}.dump() << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  auto table = commands();
  CLI::App app{"GhostLink influence-facet model"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "ghostlink 1.0.0");

  struct Bound {
    Command* command;
    CLI::App* sub;
    std::string config_path;
    std::map<std::string, std::string> scalars;
    std::map<std::string, std::vector<std::string>> lists;
    std::map<std::string, bool> flags;
    std::map<std::string, CLI::Option*> options;
  };
  std::vector<std::unique_ptr<Bound>> bound;
  for (auto& command : table) {
    auto b = std::make_unique<Bound>();
    b->command = &command;
    b->sub = app.add_subcommand(command.name, command.description);
    b->sub->add_option("--config", b->config_path, "JSON config file; flags override it");
    for (const auto& spec : command.options) {
      const std::string flag = flag_name(spec.key);
      CLI::Option* opt = nullptr;
      switch (spec.kind) {
        case Kind::Bool:
          opt = b->sub->add_flag(flag + ",!--no-" + flag.substr(2), b->flags[spec.key], spec.help);
          break;
        case Kind::StringList:
          opt = b->sub->add_option(flag, b->lists[spec.key], spec.help);
          break;
        default:
          opt = b->sub->add_option(spec.key.size() == 1 ? "-" + spec.key + "," + flag : flag,
                                   b->scalars[spec.key], spec.help);
          break;
      }
      b->options[spec.key] = opt;
    }
    bound.push_back(std::move(b));
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << app.version() << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    report_error(err, {2, "usage"}, e.what());
    return 2;
  }

  Bound* active = nullptr;
  for (auto& b : bound) {
    if (b->sub->parsed()) active = b.get();
  }
  const Command& command = *active->command;

  try {
    json cfg = json::object();
    for (const auto& spec : command.options) cfg[spec.key] = spec.fallback;
    if (!active->config_path.empty()) {
      const json file = read_config_file(active->config_path);
      for (const auto& [key, value] : file.items()) {
        auto it = std::find_if(command.options.begin(), command.options.end(),
                               [&](const OptionSpec& s) { return s.key == key; });
        if (it == command.options.end()) {
          throw InvalidArgument("unknown config key '" + key + "' for " + command.name);
        }
        check_type(*it, value);
        cfg[key] = value;
      }
    }
    for (const auto& spec : command.options) {
      if (active->options[spec.key]->count() == 0) continue;
      switch (spec.kind) {
        case Kind::Bool: cfg[spec.key] = active->flags[spec.key]; break;
        case Kind::StringList: cfg[spec.key] = active->lists[spec.key]; break;
        default: cfg[spec.key] = parse_scalar(spec, active->scalars[spec.key]); break;
      }
    }
    for (const auto& key : command.required) {
      if (cfg.at(key).is_null()) throw InvalidArgument(flag_name(key) + " is required");
    }
    Context ctx{cfg, out, err};
    command.handler(ctx);
    return 0;
  } catch (const InvalidArgument& e) {
    report_error(err, {2, "invalid_argument"}, e.what());
    return 2;
  } catch (const IoError& e) {
    report_error(err, {3, "io"}, e.what());
    return 3;
  } catch (const std::exception& e) {
    report_error(err, {1, "error"}, e.what());
    return 1;
  }
}

}  // namespace ghostlink::cli
