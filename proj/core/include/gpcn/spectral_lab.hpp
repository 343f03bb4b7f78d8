#pragma once

// Finite-state analogues of the spectral-gap, conductance, positivity and
// restriction statements for Metropolis kernels. Every quantity here is
// computed exactly (dense eigendecompositions, exhaustive subset enumeration).

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gpcn/rng.hpp"

namespace gpcn::lab {

/// Largest state count accepted by the subset enumerations (2^22 subsets).
inline constexpr std::size_t kMaxEnumerationStates = 22;

struct FiniteChain {
  Matrix P;   // row-stochastic transition matrix
  Vector pi;  // stationary distribution

  std::size_t n_states() const { return static_cast<std::size_t>(P.rows()); }
};

/// Checks shapes, row sums (1e-12), positivity and normalisation of pi.
void validate(const FiniteChain& chain);
/// max_{i,j} |pi_i P_ij - pi_j P_ji|.
double detailed_balance_error(const FiniteChain& chain);
bool is_reversible(const FiniteChain& chain, double tol = 1e-12);

/// Metropolis-Hastings chain for `target` with proposal matrix q:
/// M_ij = min(pi_i q_ij, pi_j q_ji) / pi_i off the diagonal.
FiniteChain discretize_metropolis(const Vector& target, const Matrix& q);

/// Spectrum of the chain on mean-zero functions (ascending). Requires reversibility.
Vector centered_spectrum(const FiniteChain& chain);
/// 1 - max |lambda| over the centred spectrum.
double spectral_gap(const FiniteChain& chain);
/// Largest element of the centred spectrum.
double largest_centered_eigenvalue(const FiniteChain& chain);
/// Smallest eigenvalue of diag(sqrt pi) P diag(sqrt pi)^{-1}; >= -1e-10 certifies positivity.
double positivity_check(const FiniteChain& chain);

/// min over A with pi(A) in (0, 1/2] of flow(A, A^c) / pi(A).
double conductance(const FiniteChain& chain);

struct CheegerReport {
  double phi = 0.0;
  double lambda = 0.0;  // largest centred eigenvalue
  double lower = 0.0;   // phi^2 / 2
  double upper = 0.0;   // 2 phi
  double one_minus_lambda = 0.0;
  bool ok = false;
};
/// phi^2/2 <= 1 - Lambda <= 2 phi, with 1e-10 slack.
CheegerReport cheeger_check(const FiniteChain& chain);

/// max over A with pi(A) in (0, 1/2] of
/// sum_{i in A, j notin A} (q1_ij / q2_ij)^p q2_ij pi_i / pi(A).
double kappa_p(const Matrix& q1, const Matrix& q2, const Vector& target, double p);

/// (q + I) / 2; the Metropolis chain of a lazy proposal is the lazy chain.
Matrix lazify(const Matrix& q);

struct ComparisonReport {
  double p = 2.0;
  // Conductance comparison on the given proposals.
  double phi1 = 0.0, phi2 = 0.0, kappa = 0.0;
  double conductance_lhs = 0.0, conductance_rhs = 0.0;
  bool conductance_ok = false;
  // Spectral gap comparison, evaluated on the lazified pair when positivity failed.
  bool lazified = false;
  double min_eig1 = 0.0, min_eig2 = 0.0;
  double gap1 = 0.0, gap2 = 0.0, gap_kappa = 0.0;
  double gap_lhs = 0.0, gap_rhs = 0.0;
  bool gap_ok = false;
  bool ok() const { return conductance_ok && gap_ok; }
};

/// Verifies phi(M1) <= kappa^{1/p} phi(M2)^{(p-1)/p} and
/// (gap(M1)/2)^p <= kappa (2 gap(M2))^{(p-1)/2} for the Metropolis chains of
/// q1 and q2 targeting `target`. The gap comparison requires positive
/// operators; if either chain is not positive and `lazify_if_needed` is set,
/// both proposals are lazified first (recorded in the report).
ComparisonReport comparison_check(const Vector& target, const Matrix& q1, const Matrix& q2, double p,
                                  bool lazify_if_needed = true);

struct RestrictionReport {
  FiniteChain chain;          // restricted chain on the subset
  std::vector<std::size_t> subset;
  double norm_restricted = 0.0;  // operator norm on mean-zero functions
  double norm_full = 0.0;
  double max_escape = 0.0;       // max_{u in subset} K(u, subset^c)
  bool norm_ok = false;          // norm_restricted <= norm_full + max_escape (1e-10 slack)
  bool reversible = false;
  bool full_positive = false;
  bool restricted_positive = false;
};

/// Keeps transitions inside `subset`, moves escaping mass to the diagonal and
/// renormalises pi on the subset.
RestrictionReport restrict_chain(const FiniteChain& chain, std::vector<std::size_t> subset);

struct AsymptoticVarianceReport {
  double sigma2 = 0.0;
  double variance = 0.0;  // Var_pi(f)
  double gap = 0.0;
  double bound = 0.0;     // 2 Var_pi(f) / gap
  bool bound_ok = false;
};

/// sigma^2 = <(I + K)(I - K)^{-1} f0, f0>_pi with f0 = f - E_pi f.
AsymptoticVarianceReport asymptotic_variance(const FiniteChain& chain, const Vector& f);

// Instance generators ------------------------------------------------------

/// Random probability vector with strictly positive entries.
Vector random_distribution(Rng& rng, std::size_t n);
/// Random proposal matrix reversible w.r.t. `reference`. Each off-diagonal
/// pair is kept with probability `edge_probability`; the path i -- i+1 is
/// always kept so the proposal stays irreducible.
Matrix random_reversible_proposal(Rng& rng, const Vector& reference, double edge_probability = 1.0);
/// Random reversible chain (random pi, random symmetric flows).
FiniteChain random_reversible_chain(Rng& rng, std::size_t n);

/// Grid analogue of the gpCN Metropolis chain for a one-dimensional target
/// with Gaussian reference N(0, prior_variance): the proposal is the joint
/// gpCN Gaussian law restricted to the grid, normalised row-wise, and the
/// target reweights the grid reference by exp(-Phi).
struct GridGpcn {
  FiniteChain chain;
  Vector grid;
  Matrix proposal;
  Vector reference;
  double mean_coefficient = 0.0;  // A_Gamma
  double proposal_variance = 0.0;  // s^2 C_Gamma
};
GridGpcn grid_gpcn_metropolis(std::size_t n_points, double prior_variance, double gamma, double s,
                              const std::function<double(double)>& phi);

// Verification suite -------------------------------------------------------

struct LabOptions {
  std::uint64_t seed = 0;
  std::size_t n_instances = 20;
  std::size_t min_states = 3;
  std::size_t max_states = 12;
  double p = 2.0;
  std::size_t grid_points = 15;
};

struct LabInstance {
  std::uint64_t seed = 0;
  std::size_t n_states = 0;
  double detailed_balance = 0.0;
  CheegerReport cheeger1, cheeger2;
  ComparisonReport comparison;
  RestrictionReport restriction;
  AsymptoticVarianceReport asymptotic;
  double grid_min_eigenvalue = 0.0;
  bool detailed_balance_ok = false;
  bool positivity_ok = false;
  bool ok() const;
};

struct LabReport {
  LabOptions options;
  std::vector<LabInstance> instances;
  bool all_pass() const;
};

/// Runs every check on `n_instances` seeded random instances. Throws when
/// max_states exceeds kMaxEnumerationStates.
LabReport run_lab(const LabOptions& options);
std::string lab_report_to_json(const LabReport& report);

}  // namespace gpcn::lab
