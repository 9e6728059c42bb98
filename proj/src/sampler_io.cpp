#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "ghostlink/error.hpp"
#include "ghostlink/sampler.hpp"
#include "json.hpp"

namespace ghostlink {

namespace fs = std::filesystem;

// assignments.bin layout (little-endian):
//   char[8]  magic "GLASSIGN"
//   u32      format version
//   u32      granularity (0 per_token, 1 per_unique_token)
//   u32      mode (0 ghostlink, 1 author_topic)
//   u32      K
//   u64      slot count n
//   u8[n]    s
//   i32[n]   v (influencing review id, -1 for none)
//   u32[n]   z
namespace {

constexpr std::array<char, 8> kMagic = {'G', 'L', 'A', 'S', 'S', 'I', 'G', 'N'};
static_assert(std::endian::native == std::endian::little,
              "snapshot writer assumes a little-endian host");

template <typename T>
void put(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw IoError("truncated assignments.bin");
  return value;
}

template <typename T>
void put_array(std::ostream& out, const std::vector<T>& values) {
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(T)));
}

template <typename T>
std::vector<T> get_array(std::istream& in, std::size_t n) {
  std::vector<T> values(n);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(n * sizeof(T)));
  if (!in) throw IoError("truncated assignments.bin");
  return values;
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

void write_dense(const fs::path& p, const Matrix<std::int32_t>& m, const char* row_label) {
  auto out = open_out(p);
  out << row_label;
  for (std::size_t k = 0; k < m.cols(); ++k) out << "\tc" << k;
  out << '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out << r;
    for (auto x : m.row(r)) out << '\t' << x;
    out << '\n';
  }
}

}  // namespace

void save_model(const ModelState& state, const std::vector<double>& ll_trace, const fs::path& dir) {
  fs::create_directories(dir);
  const HyperParams& h = state.hyper();
  nlohmann::json hyper = {{"format_version", kModelFormatVersion},
                          {"K", h.K},
                          {"alpha", h.alpha},
                          {"eta", h.eta},
                          {"rho", h.rho},
                          {"gamma", h.gamma},
                          {"mode", to_string(state.mode())},
                          {"granularity", to_string(state.granularity())},
                          {"influence_rule", to_string(state.influence_rule())},
                          {"iteration", state.iteration()},
                          {"num_slots", state.num_slots()}};
  open_out(dir / "hyper.json") << hyper.dump(2) << '\n';

  {
    auto out = open_out(dir / "assignments.bin");
    out.write(kMagic.data(), kMagic.size());
    put<std::uint32_t>(out, kModelFormatVersion);
    put<std::uint32_t>(out, state.granularity() == Granularity::per_token ? 0 : 1);
    put<std::uint32_t>(out, state.mode() == Mode::ghostlink ? 0 : 1);
    put<std::uint32_t>(out, h.K);
    put<std::uint64_t>(out, state.num_slots());
    put_array(out, state.s_all());
    put_array(out, state.v_all());
    put_array(out, state.z_all());
  }

  const CountTables& c = state.counts();
  {
    auto out = open_out(dir / "n_us.tsv");
    out << "user\ts0\ts1\n";
    for (std::size_t u = 0; u < c.num_users; ++u) {
      out << u << '\t' << c.user_influence(u, 0) << '\t' << c.user_influence(u, 1) << '\n';
    }
  }
  {
    auto out = open_out(dir / "n_uv.tsv");
    out << "user\tinfluencer\tcount\n";
    for (std::size_t u = 0; u < c.num_users; ++u) {
      std::vector<std::pair<UserId, std::int32_t>> row(c.user_influencer[u].begin(),
                                                       c.user_influencer[u].end());
      std::sort(row.begin(), row.end());
      for (const auto& [v, n] : row) out << u << '\t' << v << '\t' << n << '\n';
    }
  }
  write_dense(dir / "n_uz0.tsv", c.user_facet_latent, "user");
  write_dense(dir / "n_dz.tsv", c.review_facet, "review");
  write_dense(dir / "n_vz1.tsv", c.influencer_facet, "influencer");
  {
    auto out = open_out(dir / "n_zw.tsv");
    out << "facet\tword\tcount\n";
    for (std::size_t k = 0; k < c.num_facets; ++k) {
      for (std::size_t w = 0; w < c.word_facet.rows(); ++w) {
        if (c.word_facet(w, k) != 0) out << k << '\t' << w << '\t' << c.word_facet(w, k) << '\n';
      }
    }
  }
  {
    auto out = open_out(dir / "n_z.tsv");
    out << "facet\tcount\n";
    for (std::size_t k = 0; k < c.num_facets; ++k) out << k << '\t' << c.facet_total[k] << '\n';
  }
  open_out(dir / "rng_state.txt") << state.rng() << '\n';
  {
    auto out = open_out(dir / "lltrace.csv");
    out << "iteration,ll\n" << std::setprecision(17);
    for (std::size_t i = 0; i < ll_trace.size(); ++i) out << i << ',' << ll_trace[i] << '\n';
  }
}

ModelState load_model(std::shared_ptr<const Corpus> corpus, const fs::path& dir) {
  nlohmann::json hyper;
  try {
    hyper = nlohmann::json::parse(open_in(dir / "hyper.json"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad hyper.json in " + dir.string() + ": " + e.what());
  }
  if (hyper.value("format_version", 0) != kModelFormatVersion) {
    throw IoError("unsupported model format version in " + dir.string());
  }
  HyperParams h;
  h.K = hyper.at("K").get<std::uint32_t>();
  h.alpha = hyper.at("alpha").get<double>();
  h.eta = hyper.at("eta").get<double>();
  h.rho = hyper.at("rho").get<double>();
  h.gamma = hyper.at("gamma").get<double>();
  const Mode mode = parse_mode(hyper.at("mode").get<std::string>());
  const Granularity granularity = parse_granularity(hyper.at("granularity").get<std::string>());

  ModelState state(std::move(corpus), h, mode, granularity, 0);

  auto in = open_in(dir / "assignments.bin");
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw IoError("assignments.bin has a bad magic header");
  if (get<std::uint32_t>(in) != kModelFormatVersion) {
    throw IoError("unsupported assignments.bin version");
  }
  const auto gran_code = get<std::uint32_t>(in);
  const auto mode_code = get<std::uint32_t>(in);
  const auto k = get<std::uint32_t>(in);
  const auto n = get<std::uint64_t>(in);
  if (gran_code != (granularity == Granularity::per_token ? 0u : 1u) ||
      mode_code != (mode == Mode::ghostlink ? 0u : 1u) || k != h.K) {
    throw IoError("assignments.bin header disagrees with hyper.json");
  }
  if (n != state.num_slots()) {
    throw IoError("assignments.bin slot count does not match the corpus");
  }
  auto s = get_array<std::uint8_t>(in, n);
  auto v = get_array<std::int32_t>(in, n);
  auto z = get_array<std::uint32_t>(in, n);
  state.assign(std::move(s), std::move(v), std::move(z));
  state.set_iteration(hyper.value("iteration", 0u));
  state.set_influence_rule(parse_influence_rule(hyper.value("influence_rule", std::string("max"))));

  if (fs::exists(dir / "rng_state.txt")) {
    auto rin = open_in(dir / "rng_state.txt");
    rin >> state.rng();
    if (!rin) throw IoError("bad rng_state.txt");
  }
  return state;
}

std::vector<double> load_ll_trace(const fs::path& dir) {
  auto in = open_in(dir / "lltrace.csv");
  std::vector<double> trace;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto comma = line.find(',');
    if (comma == std::string::npos) throw IoError("malformed lltrace.csv");
    trace.push_back(std::stod(line.substr(comma + 1)));
  }
  return trace;
}

}  // namespace ghostlink
