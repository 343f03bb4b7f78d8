#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "gpcn/proposals.hpp"
#include "support/oracles.hpp"

using namespace gpcn;

namespace {

PriorSpec prior2() { return PriorSpec((Vector(2) << 1.0, 0.25).finished()); }

// Smooth PSD information map: Gamma(u) = J(u)^T J(u) with J depending on u.
GammaMap smooth_gamma(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Matrix M = oracle::random_psd(rng, n, n, 1.0);
  const Matrix G = oracle::random_psd(rng, n, 3, 5.0);
  return [M, G](const Vector& u) {
    const Vector w = (M * u).array().tanh().matrix();
    Matrix out = G + 2.0 * w * w.transpose();
    return Matrix(0.5 * (out + out.transpose()));
  };
}

// log q(u, v) for the local kernels, from explicit Gaussian densities.
double local_log_q(const ProposalKernel& k, const GammaMap& gamma_map, const Vector& u, const Vector& v) {
  const auto ops = oracle::gpcn_operators(k.prior().eigenvalues(), gamma_map(u), k.s());
  const double s2 = k.s() * k.s();
  const Vector mean = k.variant() == ProposalVariant::kLocalGpcn ? Vector(ops.a * u) : Vector(std::sqrt(1 - s2) * u);
  return oracle::gaussian_log_pdf(v, mean, s2 * ops.c_gamma);
}

}  // namespace

TEST(Variant, ParseAndPrint) {
  for (auto v : {ProposalVariant::kRw, ProposalVariant::kPcn, ProposalVariant::kGnRw, ProposalVariant::kGpcn,
                 ProposalVariant::kLocalGpcn, ProposalVariant::kLocalGpcn2}) {
    EXPECT_EQ(parse_variant(to_string(v)), v);
  }
  EXPECT_EQ(parse_variant("gn-rw"), ProposalVariant::kGnRw);
  EXPECT_FALSE(parse_variant("mala").has_value());
}

TEST(Propose, PcnZeroStepIsIdentity) {
  const auto k = ProposalKernel::pcn(prior2(), 0.0);
  Rng rng(1);
  const Vector u = (Vector(2) << 0.3, -0.7).finished();
  EXPECT_EQ(k.propose(u, rng), u);
}

TEST(Propose, RwReplaysSeededDraw) {
  const auto k = ProposalKernel::rw(prior2(), 0.5);
  Rng a(77), b(77);
  const Vector u = Vector::Ones(2);
  const Vector z = standard_normal(b, 2);
  const Vector expect = u + 0.5 * (Vector(2) << 1.0, 0.5).finished().cwiseProduct(z);
  EXPECT_LT((k.propose(u, a) - expect).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Propose, GpcnWithZeroGammaEqualsPcnMap) {
  const auto prior = PriorSpec::inverse_square(5);
  const auto g = ProposalKernel::gpcn(prior, Matrix::Zero(5, 5), 0.4);
  const auto p = ProposalKernel::pcn(prior, 0.4);
  std::mt19937_64 rng(3);
  for (int t = 0; t < 10; ++t) {
    const Vector u = oracle::random_normal(rng, 5);
    const Vector z = oracle::random_normal(rng, 5);
    EXPECT_EQ(g.apply(u, z), p.apply(u, z));
  }
}

TEST(Propose, GpcnWithZeroGammaMatchesPcnMoments) {
  const auto prior = PriorSpec::inverse_square(3);
  const auto g = ProposalKernel::gpcn(prior, Matrix::Zero(3, 3), 0.6);
  const Vector u = (Vector(3) << 1.0, -0.5, 0.25).finished();
  Rng rng(8);
  const int n = 100000;
  Vector mean = Vector::Zero(3);
  Matrix cov = Matrix::Zero(3, 3);
  for (int i = 0; i < n; ++i) {
    const Vector v = g.propose(u, rng);
    mean += v;
    cov += v * v.transpose();
  }
  mean /= n;
  cov = cov / n - mean * mean.transpose();
  const Vector expect_mean = 0.8 * u;
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(mean(i), expect_mean(i), 0.05 * std::abs(expect_mean(i)) + 0.01);
    EXPECT_NEAR(cov(i, i), 0.36 * prior.eigenvalues()(i), 0.05 * 0.36 * prior.eigenvalues()(i));
  }
}

TEST(Propose, LocalMeansFollowDefinition) {
  const auto prior = PriorSpec::inverse_square(4);
  const auto gm = smooth_gamma(4, 5);
  const auto k1 = ProposalKernel::local_gpcn(prior, gm, 0.3);
  const auto k2 = ProposalKernel::local_gpcn2(prior, gm, 0.3);
  const Vector u = (Vector(4) << 0.2, -0.1, 0.4, 0.05).finished();
  const auto pack = build_operator_pack(prior, gm(u), 0.3);
  EXPECT_LT((k1.mean(u) - pack.a * u).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_LT((k2.mean(u) - std::sqrt(1 - 0.09) * u).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Correction, ReversibleKernelsNeedNone) {
  const auto prior = PriorSpec::inverse_square(4);
  std::mt19937_64 rng(4);
  const Matrix gamma = oracle::random_psd(rng, 4, 2, 3.0);
  const Vector u = oracle::random_normal(rng, 4), v = oracle::random_normal(rng, 4);
  EXPECT_EQ(ProposalKernel::pcn(prior, 0.5).log_acceptance_correction(u, v), 0.0);
  EXPECT_EQ(ProposalKernel::gpcn(prior, gamma, 0.5).log_acceptance_correction(u, v), 0.0);
}

TEST(Correction, RandomWalkKernelsUsePriorRatio) {
  const auto prior = PriorSpec::inverse_square(4);
  std::mt19937_64 rng(6);
  const Matrix gamma = oracle::random_psd(rng, 4, 2, 3.0);
  const Vector u = oracle::random_normal(rng, 4), v = oracle::random_normal(rng, 4);
  const double expect = prior.log_pdf(v) - prior.log_pdf(u);
  EXPECT_NEAR(ProposalKernel::rw(prior, 0.5).log_acceptance_correction(u, v), expect, 1e-12);
  EXPECT_NEAR(ProposalKernel::gn_rw(prior, gamma, 0.5).log_acceptance_correction(u, v), expect, 1e-12);
}

TEST(Reversibility, PcnAndGpcnArePriorReversible) {
  const auto prior = PriorSpec::inverse_square(6);
  std::mt19937_64 rng(12);
  const Matrix gamma = oracle::random_psd(rng, 6, 4, 10.0);
  for (const auto& k : {ProposalKernel::pcn(prior, 0.35), ProposalKernel::gpcn(prior, gamma, 0.35)}) {
    ASSERT_TRUE(k.prior_reversible());
    const auto pack = k.variant() == ProposalVariant::kGpcn ? *k.pack() : build_operator_pack(prior, Matrix::Zero(6, 6), 0.35);
    const double s2 = 0.35 * 0.35;
    for (int t = 0; t < 20; ++t) {
      const Vector u = prior.sqrt_eigenvalues().cwiseProduct(oracle::random_normal(rng, 6));
      const Vector v = prior.sqrt_eigenvalues().cwiseProduct(oracle::random_normal(rng, 6));
      const double fwd = prior.log_pdf(u) + oracle::gaussian_log_pdf(v, pack.a * u, s2 * pack.c_gamma);
      const double bwd = prior.log_pdf(v) + oracle::gaussian_log_pdf(u, pack.a * v, s2 * pack.c_gamma);
      EXPECT_NEAR(fwd, bwd, 1e-8);
    }
  }
}

TEST(Reversibility, RandomWalkIsNotPriorReversible) {
  const auto prior = PriorSpec::inverse_square(3);
  const auto k = ProposalKernel::rw(prior, 0.5);
  EXPECT_FALSE(k.prior_reversible());
  const Vector u = (Vector(3) << 1.0, 0.0, 0.0).finished();
  const Vector v = (Vector(3) << 0.2, 0.1, 0.0).finished();
  const Matrix cov = 0.25 * prior.covariance();
  const double fwd = prior.log_pdf(u) + oracle::gaussian_log_pdf(v, u, cov);
  const double bwd = prior.log_pdf(v) + oracle::gaussian_log_pdf(u, v, cov);
  EXPECT_GT(std::abs(fwd - bwd), 1e-3);
}

TEST(Correction, LocalConstantMapMatchesGlobalDensities) {
  const auto prior = PriorSpec::inverse_square(5);
  std::mt19937_64 rng(21);
  const Matrix gamma = oracle::random_psd(rng, 5, 3, 8.0);
  const auto local = ProposalKernel::local_gpcn(prior, [gamma](const Vector&) { return gamma; }, 0.45);
  const auto global = ProposalKernel::gpcn(prior, gamma, 0.45);
  const auto pack = build_operator_pack(prior, gamma, 0.45);
  for (int t = 0; t < 20; ++t) {
    const Vector u = oracle::random_normal(rng, 5) * 0.5, v = oracle::random_normal(rng, 5) * 0.5;
    const double c = local.log_acceptance_correction(u, v);
    EXPECT_NEAR(c, log_rho_gamma(pack, u, v) - log_rho_gamma(pack, v, u), 1e-12);
    EXPECT_NEAR(c, global.log_acceptance_correction(u, v), 1e-9);
  }
}

TEST(Correction, LocalDetailedBalanceIdentity) {
  std::mt19937_64 rng(33);
  for (int t = 0; t < 100; ++t) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng() % 10);
    const auto prior = PriorSpec::inverse_square(n);
    const auto gm = smooth_gamma(n, rng());
    const double s = 0.1 + 0.8 * std::uniform_real_distribution<double>(0, 1)(rng);
    for (const auto& k : {ProposalKernel::local_gpcn(prior, gm, s), ProposalKernel::local_gpcn2(prior, gm, s)}) {
      const Vector u = prior.sqrt_eigenvalues().cwiseProduct(oracle::random_normal(rng, n));
      const Vector v = prior.sqrt_eigenvalues().cwiseProduct(oracle::random_normal(rng, n));
      // pi_0(u) q(u, v) exp(c(u, v)) must equal pi_0(v) q(v, u).
      const double lhs = oracle::gaussian_log_pdf(u, Vector::Zero(n), prior.covariance()) + local_log_q(k, gm, u, v) + k.log_acceptance_correction(u, v);
      const double rhs = oracle::gaussian_log_pdf(v, Vector::Zero(n), prior.covariance()) + local_log_q(k, gm, v, u);
      EXPECT_NEAR(lhs, rhs, 1e-8) << to_string(k.variant()) << " instance " << t;
      EXPECT_NEAR(k.log_acceptance_correction(u, v), -k.log_acceptance_correction(v, u), 1e-10);
    }
  }
}

TEST(Correction, LocalRejectsZeroStep) {
  const auto prior = PriorSpec::inverse_square(2);
  const auto k = ProposalKernel::local_gpcn(prior, smooth_gamma(2, 1), 0.0);
  EXPECT_THROW(k.log_acceptance_correction(Vector::Zero(2), Vector::Ones(2)), std::invalid_argument);
}

TEST(Kernel, StepSizeDomain) {
  const auto prior = PriorSpec::inverse_square(2);
  EXPECT_NO_THROW(ProposalKernel::rw(prior, 2.5));
  EXPECT_NO_THROW(ProposalKernel::gn_rw(prior, Matrix::Identity(2, 2), 2.5));
  EXPECT_THROW(ProposalKernel::pcn(prior, 1.0), std::invalid_argument);
  EXPECT_THROW(ProposalKernel::gpcn(prior, Matrix::Identity(2, 2), 1.2), std::invalid_argument);
  EXPECT_THROW(ProposalKernel::rw(prior, -0.1), std::invalid_argument);
}

TEST(Kernel, PackCacheDoesNotChangeResults) {
  const auto prior = PriorSpec::inverse_square(4);
  const auto gm = smooth_gamma(4, 9);
  const auto plain = ProposalKernel::local_gpcn(prior, gm, 0.4);
  const auto cached = plain.with_pack_cache(4);
  std::mt19937_64 rng(2);
  for (int t = 0; t < 10; ++t) {
    const Vector u = oracle::random_normal(rng, 4), v = oracle::random_normal(rng, 4);
    EXPECT_EQ(plain.log_acceptance_correction(u, v), cached.log_acceptance_correction(u, v));
    EXPECT_EQ(plain.log_acceptance_correction(u, v), cached.log_acceptance_correction(u, v));
  }
}
