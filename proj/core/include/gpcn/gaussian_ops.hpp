#pragma once

// Finite-dimensional Gaussian reference measures N(0, C) with diagonal C, the
// operators derived from an information matrix Gamma, and the Radon-Nikodym
// densities between the resulting Gaussian proposals.
//
// All operators are dense N x N matrices expressed in the spectral basis of
// the prior covariance.


#include "gpcn/rng.hpp"

namespace gpcn {

/// Spectral representation of the Gaussian prior N(0, C), C = diag(eigenvalues).
class PriorSpec {
 public:
  explicit PriorSpec(Vector eigenvalues);

  /// C = diag(k^-2), k = 1..dim.
  static PriorSpec inverse_square(Eigen::Index dim);

  Eigen::Index dim() const { return eigenvalues_.size(); }
  const Vector& eigenvalues() const { return eigenvalues_; }
  const Vector& sqrt_eigenvalues() const { return sqrt_eigenvalues_; }
  const Vector& inv_sqrt_eigenvalues() const { return inv_sqrt_eigenvalues_; }

  Matrix covariance() const { return eigenvalues_.asDiagonal(); }
  /// log density of N(0, C) at x, including the normalising constant.
  double log_pdf(const Vector& x) const;
  /// Draw from N(0, C).
  Vector sample(Rng& rng) const;

 private:
  Vector eigenvalues_;
  Vector sqrt_eigenvalues_;
  Vector inv_sqrt_eigenvalues_;
};

/// Eigendecomposition of the prior-whitened information operator
/// H = C^{1/2} Gamma C^{1/2} = U diag(h) U^T. Independent of the step size, so
/// a single factorisation serves every s probed by a tuner.
struct GammaFactorization {
  Vector prior_eigenvalues;
  Matrix gamma;          // symmetrised copy of the input
  Matrix h;              // H_Gamma
  Vector h_eigenvalues;  // clamped at 0, ascending
  Matrix h_eigenvectors;
};

/// Rejects non-symmetric or indefinite Gamma. Tolerances are 1e-10 relative
/// to max(1, ||Gamma||_max); small negative eigenvalues are clamped to 0.
GammaFactorization factorize_gamma(const PriorSpec& prior, const Matrix& gamma);

/// Every operator derived from (C, Gamma, s), materialised once.
struct OperatorPack {
  double s = 0.0;
  Vector prior_eigenvalues;
  Matrix gamma;
  Matrix h;         // C^{1/2} Gamma C^{1/2}
  Matrix c_gamma;   // (C^{-1} + Gamma)^{-1}
  Matrix c_gamma_factor;  // F with F F^T = C_Gamma
  Matrix a;         // mean operator A_Gamma
  Matrix delta;     // sqrt(1 - s^2) I - A_Gamma
  Matrix b;         // half-step operator, B^2 = A_Gamma
  Matrix d;         // C - B C B^T
  Vector h_eigenvalues;
  Matrix h_eigenvectors;
  double logdet_i_plus_h = 0.0;
  double h_norm = 0.0;   // largest eigenvalue of H_Gamma
  double cm_norm = 0.0;  // ||C^{-1/2} Delta_Gamma||

  Eigen::Index dim() const { return prior_eigenvalues.size(); }
  Matrix covariance() const { return prior_eigenvalues.asDiagonal(); }
};

/// Builds the pack for step size s in [0, 1).
OperatorPack build_operator_pack(const PriorSpec& prior, const Matrix& gamma, double s);
OperatorPack build_operator_pack(const GammaFactorization& factorization, double s);

/// mean + factor * z with z standard normal.
Vector sample_gaussian(const Vector& mean, const Matrix& factor, Rng& rng);
/// Diagonal factor variant: mean + diag(factor) * z.
Vector sample_gaussian_diag(const Vector& mean, const Vector& factor, Rng& rng);

/// Cameron-Martin density exp(-1/2 ||C^{-1/2} h||^2 + <C^{-1} h, v>).
double log_pi_cm(const PriorSpec& prior, const Vector& h, const Vector& v);
double pi_cm(const PriorSpec& prior, const Vector& h, const Vector& v);
/// Same formula with C given by a pack's prior eigenvalues.
double log_pi_cm(const OperatorPack& pack, const Vector& h, const Vector& v);

/// d mu_0 / d mu_Gamma at v: exp(1/2 <Gamma v, v>) / sqrt(det(I + H_Gamma)).
double log_pi_gamma(const OperatorPack& pack, const Vector& v);
double pi_gamma(const OperatorPack& pack, const Vector& v);

/// log of d P_0(u) / d P_Gamma(u) evaluated at v, where
/// P_0(u) = N(sqrt(1 - s^2) u, s^2 C) and P_Gamma(u) = N(A_Gamma u, s^2 C_Gamma).
double log_rho_gamma(const OperatorPack& pack, const Vector& u, const Vector& v);

struct IntegrabilityResult {
  double log_exact = 0.0;  // log of the integral of rho^p against P_Gamma(u)
  double log_bound = 0.0;  // log of c * exp(b ||u||^2 / 2)
  double exact() const;
  double bound() const;
};

/// Largest admissible exponent (exclusive): 1 + 1/(2 ||H_Gamma||), or +inf.
double integrability_exponent_limit(const OperatorPack& pack);

/// Closed-form p-th moment of the pCN/gpCN density together with its upper
/// bound. Requires 0 < p < integrability_exponent_limit(pack).
IntegrabilityResult integrability_bound(const OperatorPack& pack, double p, const Vector& u);

}  // namespace gpcn
