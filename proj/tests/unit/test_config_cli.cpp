#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "gpcn/config.hpp"
#include "gpcn/experiment.hpp"
#include "gpcn/trace_io.hpp"
#include "support/oracles.hpp"

using namespace gpcn;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("gpcn_test_" + name);
  fs::remove_all(d);
  return d;
}

std::string error_of(const std::string& text) {
  try {
    parse_config(text, "t.cfg");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

ExperimentConfig small_config(const fs::path& out) {
  auto c = parse_config(
      "problem.N = 10\n"
      "sampler.variant = pcn, gpcn\n"
      "sampler.pilot_n = 1000\n"
      "run.n = 1000\n"
      "run.n0 = 100\n");
  c.out_dir = out.string();
  return c;
}

}  // namespace

TEST(Rng, SplitSeedIsStableAndSeparatesStreams) {
  EXPECT_EQ(split_seed(7, Stream::kData), split_seed(7, Stream::kData));
  std::set<std::uint64_t> seen;
  for (auto s : {Stream::kData, Stream::kTuning, Stream::kChain, Stream::kLab}) {
    for (std::uint64_t i = 0; i < 4; ++i) {
      seen.insert(split_seed(7, s, i));
      seen.insert(split_seed(8, s, i));
    }
  }
  EXPECT_EQ(seen.size(), 32u);
  // SplitMix64 reference value for input 0.
  EXPECT_EQ(splitmix64(0), 0xE220A8397B1DCDAFull);
}

TEST(Rng, StandardNormalMoments) {
  Rng rng(3);
  const Vector z = standard_normal(rng, 200000);
  EXPECT_NEAR(z.mean(), 0.0, 0.01);
  EXPECT_NEAR((z.array() - z.mean()).square().mean(), 1.0, 0.01);
  for (int i = 0; i < 1000; ++i) {
    const double u = uniform01(rng);
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(Config, DefaultsAndLists) {
  const auto c = parse_config("# comment only\n\nproblem.N = 50, 100 ,200\nsampler.variant = rw, gn-rw\n");
  EXPECT_EQ(c.n_modes, (std::vector<long>{50, 100, 200}));
  EXPECT_EQ(c.variants, (std::vector<ProposalVariant>{ProposalVariant::kRw, ProposalVariant::kGnRw}));
  EXPECT_EQ(c.sigma_eps, std::vector<double>{0.1});
  EXPECT_EQ(c.n, 10000u);
  EXPECT_FALSE(c.s.has_value());
  EXPECT_TRUE(c.has_format("csv"));
  EXPECT_FALSE(c.has_format("states"));
}

TEST(Config, ErrorsAreLineAnchored) {
  EXPECT_EQ(error_of("problem.N = 10\nbogus.key = 1\n"), "t.cfg:2: unknown key 'bogus.key'");
  EXPECT_NE(error_of("run.n = 5000\n\nrun.n = 10\n").find("t.cfg:3: duplicate key 'run.n'"), std::string::npos);
  EXPECT_NE(error_of("problem.sigma_eps = abc").find("t.cfg:1:"), std::string::npos);
  EXPECT_NE(error_of("run.n = 50").find("t.cfg:1:"), std::string::npos);
  EXPECT_NE(error_of("x\n").find("t.cfg:1: expected 'key = value'"), std::string::npos);
  EXPECT_NE(error_of("sampler.variant = mala").find("unknown variant 'mala'"), std::string::npos);
  EXPECT_NE(error_of("sampler.s = 0.3\nsampler.target_acceptance = 0.3").find("t.cfg:2:"), std::string::npos);
  EXPECT_NE(error_of("sampler.variant = pcn\nsampler.s = 1.5").find("t.cfg:2:"), std::string::npos);
  EXPECT_EQ(error_of("sampler.variant = rw\nsampler.s = 1.5"), "");
  EXPECT_THROW(load_config("/nonexistent/cfg"), ConfigError);
}

TEST(Config, ResolvedTextRoundTrips) {
  auto c = parse_config(
      "problem.N = 20, 40\nproblem.sigma_eps = 0.1, 0.01\nsampler.variant = rw, pcn, gpcn\n"
      "sampler.s = 0.35\nsampler.radius = 4.5\nsampler.gamma = averaged\nsampler.gamma_points = map, prior\n"
      "run.seed = 3, 4\noutput.formats = csv, states\n");
  const auto text = to_text(c);
  const auto back = parse_config(text);
  EXPECT_EQ(to_text(back), text);
  EXPECT_EQ(back.n_modes, c.n_modes);
  EXPECT_EQ(back.sigma_eps, c.sigma_eps);
  EXPECT_EQ(*back.s, 0.35);
  EXPECT_EQ(*back.restriction_radius, 4.5);
  EXPECT_EQ(back.gamma, GammaSource::kAveraged);
  EXPECT_EQ(back.seeds, (std::vector<std::uint64_t>{3, 4}));
  // Every key appears in the resolved dump, defaults included.
  const auto lines = resolved_lines(parse_config(""));
  for (const char* key : {"problem.N", "problem.sigma_eps", "problem.dx_exponent", "problem.data_seed",
                          "sampler.variant", "sampler.target_acceptance", "sampler.radius", "run.n", "run.n0",
                          "run.seed", "output.dir", "output.formats"}) {
    bool found = false;
    for (const auto& l : lines) found = found || l.rfind(std::string(key) + " = ", 0) == 0;
    EXPECT_TRUE(found) << key;
  }
}

TEST(CmdRun, MinimalRunEmitsDeclaredFiles) {
  const auto dir = fresh_dir("minimal");
  auto c = small_config(dir);
  c.formats = {"csv", "json", "states"};
  const auto out = cmd_run(c);
  ASSERT_EQ(out.cells.size(), 2u);
  for (const auto& cell : out.cells) {
    EXPECT_TRUE(cell.tuned);
    EXPECT_EQ(cell.trace.qoi_series.front().size(), 1000u);
    for (const auto& stem : {"trace_", "states_", "diagnostics_"}) {
      const auto ext = std::string(stem) == "trace_" ? ".csv" : std::string(stem) == "states_" ? ".bin" : ".json";
      EXPECT_TRUE(fs::exists(dir / (std::string(stem) + cell.name() + ext))) << stem << cell.name();
    }
    EXPECT_EQ(read_state_dump(dir / ("states_" + cell.name() + ".bin")).rows(), 1000);
  }
  EXPECT_TRUE(fs::exists(dir / "summary.csv"));
  for (const auto& f : out.files) EXPECT_TRUE(fs::exists(f)) << f;

  // The trace header carries the whole resolved configuration.
  const auto table = read_trace_csv(dir / ("trace_" + out.cells[0].name() + ".csv"));
  std::string header;
  for (const auto& l : table.header_comments) {
    if (l.rfind("cell.", 0) != 0) header += l + "\n";
  }
  EXPECT_EQ(to_text(parse_config(header)), to_text(c));

  const auto j = nlohmann::json::parse(slurp(dir / ("diagnostics_" + out.cells[1].name() + ".json")));
  EXPECT_EQ(j["diagnostics"].size(), 2u);
  fs::remove_all(dir);
}

TEST(CmdRun, RerunGivesIdenticalTraceBytes) {
  const auto dir = fresh_dir("det");
  const auto c = small_config(dir);
  const auto a = cmd_run(c);
  std::vector<std::string> first;
  for (const auto& cell : a.cells) first.push_back(slurp(dir / ("trace_" + cell.name() + ".csv")));
  const auto b = cmd_run(c, 2);
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    EXPECT_EQ(slurp(dir / ("trace_" + b.cells[i].name() + ".csv")), first[i]);
    EXPECT_EQ(a.cells[i].s, b.cells[i].s);
  }
  fs::remove_all(dir);
}

TEST(CmdRun, SweepEmitsOneRowPerCell) {
  const auto dir = fresh_dir("sweep");
  auto c = parse_config(
      "problem.N = 50, 100, 200, 400, 800\nsampler.variant = pcn\nsampler.s = 0.2\nrun.n = 200\nrun.n0 = 0\n"
      "output.formats = csv\n");
  c.out_dir = dir.string();
  cmd_run(c);
  std::ifstream in(dir / "summary.csv");
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '#') rows.push_back(line);
  }
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[0].rfind("variant,N,sigma_eps,seed,s,tuned,acceptance_rate,ess_ims,ess_batch_means", 0), 0u);
  std::set<std::string> ns;
  for (std::size_t i = 1; i < rows.size(); ++i) ns.insert(rows[i].substr(4, rows[i].find(',', 4) - 4));
  EXPECT_EQ(ns, (std::set<std::string>{"50", "100", "200", "400", "800"}));
  fs::remove_all(dir);
}

TEST(CmdMap, ConsistentRoundTrip) {
  const auto dir = fresh_dir("map");
  auto c = parse_config("problem.N = 15\nproblem.sigma_eps = 0.05\n");
  c.out_dir = dir.string();
  const auto outs = cmd_map(c);
  ASSERT_EQ(outs.size(), 1u);
  const auto& m = outs.front();
  EXPECT_TRUE(m.converged);
  EXPECT_EQ(read_matrix_csv(m.files[1]), m.gamma);
  EXPECT_EQ(read_matrix_csv(m.files[0]), Matrix(m.xi_map));

  // Recompute Phi from the written artifacts alone.
  const auto obs = elliptic::observation_from_json(slurp(m.files[2]));
  const elliptic::ForwardModel model(15);
  const Vector xi = read_matrix_csv(m.files[0]);
  const auto j = nlohmann::json::parse(slurp(m.files[3]));
  EXPECT_EQ(j["phi_map"].get<double>(), elliptic::phi(xi, obs, model));
  EXPECT_EQ(j["N"], 15);
  fs::remove_all(dir);
}

TEST(CmdDiagnose, SyntheticTraces) {
  const auto dir = fresh_dir("diag");
  fs::create_directories(dir);
  const auto write = [&](const std::string& name, const std::vector<double>& x) {
    std::ofstream out(dir / name);
    out << "# synthetic\nindex,accepted,q\n";
    for (std::size_t i = 0; i < x.size(); ++i) out << i << ",1," << format_double(x[i]) << "\n";
  };
  const std::size_t n = 50000;
  write("iid.csv", oracle::ar1(1, n, 0.0));
  write("ar.csv", oracle::ar1(2, n, 0.5));
  const auto ji = nlohmann::json::parse(cmd_diagnose(dir / "iid.csv"));
  const auto ja = nlohmann::json::parse(cmd_diagnose(dir / "ar.csv"));
  const auto ess = [](const nlohmann::json& j) {
    return j["qoi"][0]["ims"]["ess"].get<double>();
  };
  EXPECT_NEAR(ess(ji) / n, 1.0, 0.1);
  EXPECT_NEAR(ess(ja) / (n / 3.0), 1.0, 0.15);

  std::ofstream(dir / "empty.csv") << "# nothing\nindex,accepted,q\n";
  EXPECT_THROW(cmd_diagnose(dir / "empty.csv"), std::exception);
  fs::remove_all(dir);
}

TEST(CmdLab, DeterministicAndBudgeted) {
  EXPECT_EQ(cmd_lab(5, 4, 8), cmd_lab(5, 4, 8));
  EXPECT_THROW(cmd_lab(5, 4, 30), std::invalid_argument);
}

TEST(ParallelFor, RunsEveryIndexAndPropagatesErrors) {
  std::vector<int> hits(50, 0);
  parallel_for(50, 4, [&](std::size_t i) { hits[i] += 1; });
  EXPECT_EQ(std::count(hits.begin(), hits.end(), 1), 50);
  EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) {
                 if (i == 7) throw std::runtime_error("boom");
               }),
               std::runtime_error);
}
