#pragma once

// Gaussian proposal kernels for Metropolis sampling with a Gaussian prior
// reference measure: random walk (RW), preconditioned Crank-Nicolson (pCN),
// Gauss-Newton random walk (GN-RW), generalized pCN (gpCN) and the two
// state-dependent gpCN variants.

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "gpcn/gaussian_ops.hpp"

namespace gpcn {

enum class ProposalVariant { kRw, kPcn, kGnRw, kGpcn, kLocalGpcn, kLocalGpcn2 };

std::string_view to_string(ProposalVariant v);
/// Accepts "rw", "pcn", "gnrw"/"gn-rw", "gpcn", "local-gpcn", "local-gpcn2".
std::optional<ProposalVariant> parse_variant(std::string_view name);

/// Maps a state to a symmetric PSD information matrix Gamma(u).
using GammaMap = std::function<Matrix(const Vector&)>;

class PackCache;

/// Immutable proposal description. Construct through the named factories.
class ProposalKernel {
 public:
  static ProposalKernel rw(PriorSpec prior, double s);
  static ProposalKernel pcn(PriorSpec prior, double s);
  static ProposalKernel gn_rw(PriorSpec prior, const Matrix& gamma, double s);
  static ProposalKernel gn_rw(PriorSpec prior, std::shared_ptr<const GammaFactorization> factorization,
                              double s);
  static ProposalKernel gpcn(PriorSpec prior, const Matrix& gamma, double s);
  static ProposalKernel gpcn(PriorSpec prior, std::shared_ptr<const GammaFactorization> factorization,
                             double s);
  /// N(A_{Gamma(u)} u, s^2 C_{Gamma(u)}).
  static ProposalKernel local_gpcn(PriorSpec prior, GammaMap gamma_map, double s);
  /// N(sqrt(1 - s^2) u, s^2 C_{Gamma(u)}).
  static ProposalKernel local_gpcn2(PriorSpec prior, GammaMap gamma_map, double s);

  ProposalVariant variant() const { return variant_; }
  double s() const { return s_; }
  const PriorSpec& prior() const { return prior_; }
  Eigen::Index dim() const { return prior_.dim(); }
  /// Pack of the global GN-RW / gpCN kernels; null otherwise.
  const std::shared_ptr<const OperatorPack>& pack() const { return pack_; }
  bool is_local() const {
    return variant_ == ProposalVariant::kLocalGpcn || variant_ == ProposalVariant::kLocalGpcn2;
  }
  /// True for pCN and gpCN, whose proposals are reversible with respect to the prior.
  bool prior_reversible() const;

  /// Opt-in LRU cache of per-state packs for the local variants.
  ProposalKernel with_pack_cache(std::size_t capacity) const;

  /// Pack for Gamma(u) at this kernel's step size (local variants only).
  std::shared_ptr<const OperatorPack> local_pack(const Vector& u) const;

  /// Mean of the proposal distribution at u.
  Vector mean(const Vector& u) const;
  /// Deterministic proposal map: mean(u) + s * F z for a standard normal z.
  Vector apply(const Vector& u, const Vector& z) const;
  /// Draws a candidate from the proposal at u.
  Vector propose(const Vector& u, Rng& rng) const;
  /// Additive log term so that the log acceptance ratio equals
  /// Phi(u) - Phi(v) + correction. Zero for pCN and gpCN; the prior density
  /// ratio log pi_0(v) - log pi_0(u) for the symmetric RW and GN-RW kernels.
  double log_acceptance_correction(const Vector& u, const Vector& v) const;

 private:
  ProposalKernel(ProposalVariant variant, PriorSpec prior, double s);

  ProposalVariant variant_;
  PriorSpec prior_;
  double s_;
  std::shared_ptr<const OperatorPack> pack_;
  GammaMap gamma_map_;
  std::shared_ptr<PackCache> cache_;
};

/// Free-function spellings of the kernel operations.
inline Vector propose(const ProposalKernel& kernel, const Vector& u, Rng& rng) {
  return kernel.propose(u, rng);
}
inline double log_acceptance_correction(const ProposalKernel& kernel, const Vector& u, const Vector& v) {
  return kernel.log_acceptance_correction(u, v);
}

}  // namespace gpcn
