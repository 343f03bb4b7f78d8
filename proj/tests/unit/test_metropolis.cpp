#include <cmath>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "gpcn/elliptic.hpp"
#include "gpcn/metropolis.hpp"
#include "gpcn/trace_io.hpp"
#include "support/oracles.hpp"

using namespace gpcn;

namespace {

Posterior flat(Eigen::Index n) {
  return Posterior{PriorSpec::inverse_square(n), [](const Vector&) { return 0.0; }};
}

// Linear Gaussian posterior y = L xi + noise in two dimensions.
struct LinearProblem {
  PriorSpec prior{(Vector(2) << 1.0, 0.25).finished()};
  Matrix L = (Matrix(2, 2) << 1.0, 0.5, -0.3, 2.0).finished();
  Vector y = (Vector(2) << 0.8, -0.4).finished();
  double sigma = 0.1;

  Posterior posterior() const {
    auto l = L;
    auto obs = y;
    const double s = sigma;
    return {prior, [l, obs, s](const Vector& x) { return 0.5 * (obs - l * x).squaredNorm() / (s * s); }};
  }
  Matrix gamma() const { return L.transpose() * L / (sigma * sigma); }
};

ChainConfig chain_config(ProposalKernel kernel, Posterior post, std::size_t n, std::uint64_t seed) {
  ChainConfig c{.kernel = std::move(kernel), .posterior = std::move(post)};
  c.n = n;
  c.n0 = 100;
  c.seed = seed;
  c.initial_state = Vector::Zero(c.kernel.dim());
  c.qoi = {Qoi{"x0", [](const Vector& x) { return x(0); }}};
  return c;
}

}  // namespace

TEST(MhStep, FlatTargetAlwaysAccepts) {
  const auto post = flat(3);
  const auto k = ProposalKernel::pcn(post.prior, 0.7);
  Rng rng(1);
  ChainState st{Vector::Zero(3), 0.0};
  for (int i = 0; i < 100; ++i) {
    const auto r = mh_step(k, post, st, rng);
    EXPECT_TRUE(r.accepted);
    st = r.state;
  }
}

TEST(MhStep, RestrictionRejectsEscapes) {
  const auto post = flat(2);
  const auto k = ProposalKernel::rw(post.prior, 5.0);
  Rng rng(2);
  ChainState st{Vector::Zero(2), 0.0};
  int escapes = 0;
  for (int i = 0; i < 200; ++i) {
    const auto r = mh_step(k, post, st, rng, 0.5);
    if (r.escaped) {
      ++escapes;
      EXPECT_FALSE(r.accepted);
      EXPECT_EQ(r.state.x, st.x);
    }
    EXPECT_LT(r.state.x.norm(), 0.5);
    st = r.state;
  }
  EXPECT_GT(escapes, 0);
}

TEST(MhStep, NonFinitePotentialIsRejected) {
  Posterior post{PriorSpec::inverse_square(2), [](const Vector& x) {
                   return x(0) > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
                 }};
  const auto k = ProposalKernel::pcn(post.prior, 0.9);
  Rng rng(3);
  ChainState st{(Vector(2) << -1.0, 0.0).finished(), 0.0};
  int nonfinite = 0;
  for (int i = 0; i < 200; ++i) {
    const auto r = mh_step(k, post, st, rng);
    if (r.nonfinite) {
      ++nonfinite;
      EXPECT_FALSE(r.accepted);
    }
    st = r.state;
    EXPECT_LE(st.x(0), 0.0);
  }
  EXPECT_GT(nonfinite, 0);
}

TEST(RunChain, EmptyRunAndDeterminism) {
  const LinearProblem lp;
  auto cfg = chain_config(ProposalKernel::pcn(lp.prior, 0.3), lp.posterior(), 0, 5);
  const auto empty = run_chain(cfg);
  EXPECT_EQ(empty.states.rows(), 0);
  EXPECT_EQ(empty.accepts.size(), 100u);
  EXPECT_TRUE(empty.qoi_series.front().empty());

  cfg.n = 2000;
  const auto a = run_chain(cfg);
  const auto b = run_chain(cfg);
  EXPECT_EQ(a.qoi_series, b.qoi_series);
  EXPECT_EQ(a.accepts, b.accepts);
  EXPECT_EQ(a.states, b.states);
  EXPECT_EQ(a.qoi_series.front().size(), 2000u);
  double mean = 0.0;
  for (bool x : a.accepts) mean += x;
  EXPECT_DOUBLE_EQ(a.acceptance_rate, mean / static_cast<double>(a.accepts.size()));
}

TEST(RunChain, ThinningAndStateStorage) {
  const LinearProblem lp;
  auto cfg = chain_config(ProposalKernel::pcn(lp.prior, 0.3), lp.posterior(), 1000, 5);
  cfg.thinning = 10;
  EXPECT_EQ(run_chain(cfg).states.rows(), 100);
  cfg.store_states = false;
  EXPECT_EQ(run_chain(cfg).states.rows(), 0);
}

TEST(RunChain, RestrictedChainStaysInBall) {
  const LinearProblem lp;
  auto cfg = chain_config(ProposalKernel::rw(lp.prior, 1.0), lp.posterior(), 3000, 8);
  cfg.restriction_radius = 0.6;
  const auto t = run_chain(cfg);
  EXPECT_LT(t.max_state_norm, 0.6);
  cfg.initial_state = Vector::Ones(2);
  EXPECT_THROW(run_chain(cfg), std::invalid_argument);
}

TEST(RunChain, PcnSamplesLinearPosterior) {
  const LinearProblem lp;
  const auto exact = elliptic::linear_posterior(lp.L, Vector::Zero(2), lp.y,
                                                lp.sigma * lp.sigma * Matrix::Identity(2, 2), lp.prior);
  auto cfg = chain_config(ProposalKernel::pcn(lp.prior, 0.05), lp.posterior(), 100000, 13);
  cfg.initial_state = exact.mean;
  const auto t = run_chain(cfg);
  const auto& x = t.qoi_series.front();
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  // Batch-means standard error with 50 batches.
  const std::size_t nb = 50, bs = x.size() / nb;
  double var_bm = 0.0;
  for (std::size_t b = 0; b < nb; ++b) {
    double m = 0.0;
    for (std::size_t i = 0; i < bs; ++i) m += x[b * bs + i];
    m /= static_cast<double>(bs);
    var_bm += (m - mean) * (m - mean);
  }
  const double se = std::sqrt(var_bm / (nb - 1) / nb);
  EXPECT_LT(std::abs(mean - exact.mean(0)), 3.0 * se);
}

TEST(RunChain, GpcnAcceptsMoreThanPcnAtEqualStep) {
  const LinearProblem lp;
  const auto post = lp.posterior();
  auto pc = chain_config(ProposalKernel::pcn(lp.prior, 0.3), post, 10000, 21);
  auto gc = chain_config(ProposalKernel::gpcn(lp.prior, lp.gamma(), 0.3), post, 10000, 21);
  EXPECT_GT(run_chain(gc).acceptance_rate, run_chain(pc).acceptance_rate);
}

TEST(Tuning, FlatTargetHitsUpperBoundary) {
  const auto post = flat(3);
  Rng rng(4);
  const auto r = tune_step_size([&](double s) { return ProposalKernel::pcn(post.prior, s); }, post, 0.25, 1000,
                                rng, Vector::Zero(3));
  EXPECT_TRUE(r.at_boundary);
  EXPECT_DOUBLE_EQ(r.s, 0.999);
  EXPECT_DOUBLE_EQ(r.pilot_rate, 1.0);
}

TEST(Tuning, ReachesTargetOnEllipticProblem) {
  const elliptic::ForwardModel model(50);
  const auto prior = PriorSpec::inverse_square(50);
  const auto obs = elliptic::generate_data(elliptic::TruthSpec::sine(), 0.1, model, 7);
  const Posterior post{prior, [&](const Vector& xi) { return elliptic::phi(xi, obs, model); }};
  const auto map = elliptic::map_estimate(obs, model, prior);
  const auto factory = [&](double s) { return ProposalKernel::pcn(prior, s); };
  Rng rng(5);
  const auto r = tune_step_size(factory, post, 0.25, 2000, rng, map.xi);
  EXPECT_FALSE(r.at_boundary);
  EXPECT_GE(r.pilot_rate, 0.20);
  EXPECT_LE(r.pilot_rate, 0.30);

  // Halving s does not lower the acceptance rate (median over 3 seeds).
  std::vector<double> diffs;
  for (std::uint64_t seed : {1, 2, 3}) {
    Rng a(seed), b(seed + 100);
    diffs.push_back(pilot_acceptance(factory(r.s / 2), post, 2000, a, map.xi) -
                    pilot_acceptance(factory(r.s), post, 2000, b, map.xi));
  }
  std::sort(diffs.begin(), diffs.end());
  EXPECT_GE(diffs[1], 0.0);
}

TEST(TraceIo, CsvRoundTripIsExact) {
  const LinearProblem lp;
  auto cfg = chain_config(ProposalKernel::pcn(lp.prior, 0.3), lp.posterior(), 500, 3);
  cfg.qoi.push_back(Qoi{"x1", [](const Vector& x) { return x(1); }});
  const auto t = run_chain(cfg);
  const auto path = std::filesystem::temp_directory_path() / "gpcn_trace_roundtrip.csv";
  write_trace_csv(path, t, cfg.n0, {"note = test"});
  const auto table = read_trace_csv(path);
  ASSERT_EQ(table.rows(), 500u);
  EXPECT_EQ(table.qoi_names, (std::vector<std::string>{"x0", "x1"}));
  EXPECT_EQ(table.header_comments.front(), "note = test");
  for (std::size_t i = 0; i < 500; ++i) {
    EXPECT_EQ(table.qoi[0][i], t.qoi_series[0][i]);
    EXPECT_EQ(table.qoi[1][i], t.qoi_series[1][i]);
    EXPECT_EQ(table.accepted[i], t.accepts[cfg.n0 + i] ? 1 : 0);
  }
  std::filesystem::remove(path);
}

TEST(TraceIo, StateDumpAndMatrixCsvRoundTrip) {
  std::mt19937_64 rng(1);
  Matrix m(7, 3);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = std::normal_distribution<double>()(rng) * 1e-3;
  const auto dir = std::filesystem::temp_directory_path();
  write_state_dump(dir / "gpcn_states.bin", m);
  EXPECT_EQ(read_state_dump(dir / "gpcn_states.bin"), m);
  EXPECT_EQ(std::filesystem::file_size(dir / "gpcn_states.bin"), 16u + 7u * 3u * 8u);
  write_matrix_csv(dir / "gpcn_matrix.csv", m, {"a = b"});
  EXPECT_EQ(read_matrix_csv(dir / "gpcn_matrix.csv"), m);
}

TEST(TraceIo, FormatDoubleRoundTrips) {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23}) {
    EXPECT_EQ(std::stod(format_double(x)), x);
  }
}
