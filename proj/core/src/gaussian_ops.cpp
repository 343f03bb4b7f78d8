#include "gpcn/gaussian_ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <Eigen/Eigenvalues>

namespace gpcn {

namespace {

constexpr double kSymmetryTol = 1e-10;
// Eigenvalues of H below this (relative) level are treated as exact zeros so
// that rank-deficient information matrices yield exactly sqrt(1 - s^2) on the
// complement of their range.
constexpr double kNullEigenTol = 1e-13;

void check_dim(const PriorSpec& prior, const Vector& x, const char* what) {
  if (x.size() != prior.dim()) {
    std::ostringstream msg;
    msg << what << ": dimension " << x.size() << " does not match prior dimension " << prior.dim();
    throw std::invalid_argument(msg.str());
  }
}

}  // namespace

PriorSpec::PriorSpec(Vector eigenvalues) : eigenvalues_(std::move(eigenvalues)) {
  if (eigenvalues_.size() == 0) throw std::invalid_argument("PriorSpec: empty eigenvalue vector");
  for (Eigen::Index k = 0; k < eigenvalues_.size(); ++k) {
    if (!(eigenvalues_[k] > 0.0) || !std::isfinite(eigenvalues_[k])) {
      std::ostringstream msg;
      msg << "PriorSpec: eigenvalue " << k << " = " << eigenvalues_[k] << " is not positive";
      throw std::invalid_argument(msg.str());
    }
  }
  sqrt_eigenvalues_ = eigenvalues_.cwiseSqrt();
  inv_sqrt_eigenvalues_ = sqrt_eigenvalues_.cwiseInverse();
}

PriorSpec PriorSpec::inverse_square(Eigen::Index dim) {
  if (dim <= 0) throw std::invalid_argument("PriorSpec: dimension must be positive");
  Vector lambda(dim);
  for (Eigen::Index k = 0; k < dim; ++k) {
    const double kk = static_cast<double>(k + 1);
    lambda[k] = 1.0 / (kk * kk);
  }
  return PriorSpec(std::move(lambda));
}

double PriorSpec::log_pdf(const Vector& x) const {
  check_dim(*this, x, "PriorSpec::log_pdf");
  const double n = static_cast<double>(dim());
  const double quad = (x.array().square() / eigenvalues_.array()).sum();
  return -0.5 * quad - 0.5 * eigenvalues_.array().log().sum() -
         0.5 * n * std::log(2.0 * std::numbers::pi);
}

Vector PriorSpec::sample(Rng& rng) const {
  return sqrt_eigenvalues_.cwiseProduct(standard_normal(rng, dim()));
}

GammaFactorization factorize_gamma(const PriorSpec& prior, const Matrix& gamma) {
  const Eigen::Index n = prior.dim();
  if (gamma.rows() != n || gamma.cols() != n) {
    std::ostringstream msg;
    msg << "Gamma must be " << n << "x" << n << ", got " << gamma.rows() << "x" << gamma.cols();
    throw std::invalid_argument(msg.str());
  }
  if (!gamma.allFinite()) throw std::invalid_argument("Gamma has non-finite entries");

  const double scale = std::max(1.0, gamma.cwiseAbs().maxCoeff());
  const double asym = (gamma - gamma.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymmetryTol * scale) {
    std::ostringstream msg;
    msg << "Gamma is not symmetric: max |G - G^T| = " << asym << " exceeds " << kSymmetryTol * scale;
    throw std::invalid_argument(msg.str());
  }

  GammaFactorization f;
  f.prior_eigenvalues = prior.eigenvalues();
  f.gamma = 0.5 * (gamma + gamma.transpose());
  const Vector& sq = prior.sqrt_eigenvalues();
  f.h = sq.asDiagonal() * f.gamma * sq.asDiagonal();
  f.h = 0.5 * (f.h + f.h.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Matrix> eig(f.h);
  if (eig.info() != Eigen::Success) throw std::runtime_error("eigendecomposition of H_Gamma failed");
  f.h_eigenvalues = eig.eigenvalues();
  f.h_eigenvectors = eig.eigenvectors();

  const double h_scale = std::max(1.0, f.h_eigenvalues.cwiseAbs().maxCoeff());
  const double min_eig = f.h_eigenvalues.minCoeff();
  if (min_eig < -kSymmetryTol * h_scale) {
    std::ostringstream msg;
    msg << "Gamma is indefinite: smallest eigenvalue of C^{1/2} Gamma C^{1/2} is " << min_eig;
    throw std::invalid_argument(msg.str());
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (f.h_eigenvalues[i] <= kNullEigenTol * h_scale) f.h_eigenvalues[i] = 0.0;
  }
  return f;
}

OperatorPack build_operator_pack(const PriorSpec& prior, const Matrix& gamma, double s) {
  return build_operator_pack(factorize_gamma(prior, gamma), s);
}

OperatorPack build_operator_pack(const GammaFactorization& fac, double s) {
  if (!(s >= 0.0 && s < 1.0)) {
    std::ostringstream msg;
    msg << "step size s = " << s << " outside [0, 1)";
    throw std::invalid_argument(msg.str());
  }
  const Eigen::Index n = fac.prior_eigenvalues.size();
  const Vector& c = fac.prior_eigenvalues;
  const Vector sq = c.cwiseSqrt();
  const Vector inv_sq = sq.cwiseInverse();
  const Vector& lambda = fac.h_eigenvalues;
  const Matrix& u = fac.h_eigenvectors;

  const double s2 = s * s;
  const double a0 = std::sqrt(1.0 - s2);
  const double b0 = std::sqrt(a0);

  // Only directions with a nonzero eigenvalue of H differ from the pCN case.
  std::vector<Eigen::Index> active;
  for (Eigen::Index i = 0; i < n; ++i)
    if (lambda[i] > 0.0) active.push_back(i);
  const auto r = static_cast<Eigen::Index>(active.size());

  Matrix ur(n, r);
  Vector lam_r(r);
  for (Eigen::Index j = 0; j < r; ++j) {
    ur.col(j) = u.col(active[static_cast<std::size_t>(j)]);
    lam_r[j] = lambda[active[static_cast<std::size_t>(j)]];
  }
  const Matrix w = sq.asDiagonal() * ur;     // C^{1/2} U_r
  const Matrix v = inv_sq.asDiagonal() * ur; // C^{-1/2} U_r

  Vector f_minus_a0(r), f4_minus_b0(r), inv1p_minus_1(r), invsqrt1p_minus_1(r);
  for (Eigen::Index j = 0; j < r; ++j) {
    const double f = std::sqrt(1.0 - s2 / (1.0 + lam_r[j]));
    f_minus_a0[j] = f - a0;
    f4_minus_b0[j] = std::sqrt(f) - b0;
    inv1p_minus_1[j] = -lam_r[j] / (1.0 + lam_r[j]);
    invsqrt1p_minus_1[j] = 1.0 / std::sqrt(1.0 + lam_r[j]) - 1.0;
  }

  OperatorPack p;
  p.s = s;
  p.prior_eigenvalues = c;
  p.gamma = fac.gamma;
  p.h = fac.h;
  p.h_eigenvalues = lambda;
  p.h_eigenvectors = u;

  p.a = Matrix::Identity(n, n) * a0;
  p.b = Matrix::Identity(n, n) * b0;
  p.c_gamma = c.asDiagonal();
  p.c_gamma_factor = sq.asDiagonal();
  p.d = (c * (1.0 - a0)).asDiagonal();
  p.delta = Matrix::Zero(n, n);
  p.cm_norm = 0.0;
  if (r > 0) {
    p.a.noalias() += w * f_minus_a0.asDiagonal() * v.transpose();
    p.b.noalias() += w * f4_minus_b0.asDiagonal() * v.transpose();
    p.c_gamma.noalias() += w * inv1p_minus_1.asDiagonal() * w.transpose();
    p.c_gamma = 0.5 * (p.c_gamma + p.c_gamma.transpose()).eval();
    p.c_gamma_factor.noalias() += w * invsqrt1p_minus_1.asDiagonal() * ur.transpose();
    p.d.noalias() -= w * f_minus_a0.asDiagonal() * w.transpose();
    p.d = 0.5 * (p.d + p.d.transpose()).eval();
    p.delta.noalias() -= w * f_minus_a0.asDiagonal() * v.transpose();

    // C^{-1/2} Delta = -U_r diag(f - a0) U_r^T C^{-1/2}; its squared norm is the
    // top eigenvalue of the r x r matrix diag(g) (V^T V) diag(g).
    const Matrix gram = v.transpose() * v;
    const Matrix k = f_minus_a0.asDiagonal() * gram * f_minus_a0.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Matrix> keig(0.5 * (k + k.transpose()), Eigen::EigenvaluesOnly);
    p.cm_norm = std::sqrt(std::max(0.0, keig.eigenvalues().maxCoeff()));
  }

  p.logdet_i_plus_h = lambda.array().log1p().sum();
  p.h_norm = lambda.size() > 0 ? std::max(0.0, lambda.maxCoeff()) : 0.0;
  return p;
}

Vector sample_gaussian(const Vector& mean, const Matrix& factor, Rng& rng) {
  if (factor.rows() != mean.size()) {
    throw std::invalid_argument("sample_gaussian: factor rows do not match mean dimension");
  }
  return mean + factor * standard_normal(rng, factor.cols());
}

Vector sample_gaussian_diag(const Vector& mean, const Vector& factor, Rng& rng) {
  if (factor.size() != mean.size()) {
    throw std::invalid_argument("sample_gaussian_diag: factor does not match mean dimension");
  }
  return mean + factor.cwiseProduct(standard_normal(rng, mean.size()));
}

namespace {

double log_pi_cm_impl(const Vector& c, const Vector& h, const Vector& v) {
  if (h.size() != c.size() || v.size() != c.size()) {
    throw std::invalid_argument("pi_cm: dimension mismatch");
  }
  const Eigen::ArrayXd ch = h.array() / c.array();
  return -0.5 * (h.array() * ch).sum() + (ch * v.array()).sum();
}

}  // namespace

double log_pi_cm(const PriorSpec& prior, const Vector& h, const Vector& v) {
  return log_pi_cm_impl(prior.eigenvalues(), h, v);
}

double pi_cm(const PriorSpec& prior, const Vector& h, const Vector& v) {
  return std::exp(log_pi_cm(prior, h, v));
}

double log_pi_cm(const OperatorPack& pack, const Vector& h, const Vector& v) {
  return log_pi_cm_impl(pack.prior_eigenvalues, h, v);
}

double log_pi_gamma(const OperatorPack& pack, const Vector& v) {
  if (v.size() != pack.dim()) throw std::invalid_argument("pi_gamma: dimension mismatch");
  return 0.5 * v.dot(pack.gamma * v) - 0.5 * pack.logdet_i_plus_h;
}

double pi_gamma(const OperatorPack& pack, const Vector& v) { return std::exp(log_pi_gamma(pack, v)); }

double log_rho_gamma(const OperatorPack& pack, const Vector& u, const Vector& v) {
  if (!(pack.s > 0.0)) {
    throw std::invalid_argument("log_rho_gamma: density undefined for s = 0 (degenerate proposals)");
  }
  if (u.size() != pack.dim() || v.size() != pack.dim()) {
    throw std::invalid_argument("log_rho_gamma: dimension mismatch");
  }
  const Vector w = (v - pack.a * u) / pack.s;
  const Vector shift = (pack.delta * u) / pack.s;
  return log_pi_cm(pack, shift, w) + log_pi_gamma(pack, w);
}

double IntegrabilityResult::exact() const { return std::exp(log_exact); }
double IntegrabilityResult::bound() const { return std::exp(log_bound); }

double integrability_exponent_limit(const OperatorPack& pack) {
  if (pack.h_norm <= 0.0) return std::numeric_limits<double>::infinity();
  return 1.0 + 1.0 / (2.0 * pack.h_norm);
}

IntegrabilityResult integrability_bound(const OperatorPack& pack, double p, const Vector& u) {
  const double limit = integrability_exponent_limit(pack);
  if (!(p > 0.0 && p < limit)) {
    std::ostringstream msg;
    msg << "integrability exponent p = " << p << " outside (0, 1 + 1/(2||H_Gamma||)) = (0, " << limit
        << ")";
    throw std::invalid_argument(msg.str());
  }
  if (u.size() != pack.dim()) throw std::invalid_argument("integrability_bound: dimension mismatch");

  IntegrabilityResult out;
  const Vector& lambda = pack.h_eigenvalues;
  const double cm_shift = pack.s > 0.0 ? 1.0 / pack.s : 0.0;
  const Vector delta_u = pack.delta * u;
  if (pack.s == 0.0 && delta_u.norm() > 0.0) {
    throw std::invalid_argument("integrability_bound: s = 0 with nonzero Delta_Gamma u");
  }

  // Whitened shift a = C^{-1/2} Delta u / s expressed in the eigenbasis of H.
  const Vector a = pack.prior_eigenvalues.cwiseSqrt().cwiseInverse().cwiseProduct(delta_u) * cm_shift;
  const Vector a_rot = pack.h_eigenvectors.transpose() * a;

  double logdet_exact = 0.0, quad = 0.0;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    const double t = 1.0 - (p - 1.0) * lambda[i];
    logdet_exact += std::log(t);
    quad += a_rot[i] * a_rot[i] / t;
  }
  out.log_exact = -0.5 * logdet_exact - 0.5 * (p - 1.0) * pack.logdet_i_plus_h - 0.5 * p * a.squaredNorm() +
                  0.5 * p * p * quad;

  double logdet_c = 0.0;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) logdet_c += std::log(1.0 - (2.0 * p - 2.0) * lambda[i]);
  const double log_c = -0.25 * (logdet_c + (2.0 * p - 2.0) * pack.logdet_i_plus_h);
  const double b = std::max(0.0, 2.0 * p * p - p) * pack.cm_norm * pack.cm_norm * cm_shift * cm_shift;
  out.log_bound = log_c + 0.5 * b * u.squaredNorm();
  return out;
}

}  // namespace gpcn
