#include "gpcn/proposals.hpp"

#include <cmath>
#include <cstring>
#include <list>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace gpcn {

std::string_view to_string(ProposalVariant v) {
  switch (v) {
    case ProposalVariant::kRw: return "rw";
    case ProposalVariant::kPcn: return "pcn";
    case ProposalVariant::kGnRw: return "gnrw";
    case ProposalVariant::kGpcn: return "gpcn";
    case ProposalVariant::kLocalGpcn: return "local-gpcn";
    case ProposalVariant::kLocalGpcn2: return "local-gpcn2";
  }
  return "unknown";
}

std::optional<ProposalVariant> parse_variant(std::string_view name) {
  if (name == "rw") return ProposalVariant::kRw;
  if (name == "pcn") return ProposalVariant::kPcn;
  if (name == "gnrw" || name == "gn-rw") return ProposalVariant::kGnRw;
  if (name == "gpcn") return ProposalVariant::kGpcn;
  if (name == "local-gpcn") return ProposalVariant::kLocalGpcn;
  if (name == "local-gpcn2") return ProposalVariant::kLocalGpcn2;
  return std::nullopt;
}

// LRU map from exact state bytes to the pack built for Gamma(state).
class PackCache {
 public:
  explicit PackCache(std::size_t capacity) : capacity_(capacity) {}

  std::shared_ptr<const OperatorPack> find(const Vector& u) {
    const std::string key = key_of(u);
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = index_.find(key);
    if (it == index_.end()) return nullptr;
    order_.splice(order_.begin(), order_, it->second);
    return it->second->second;
  }

  void insert(const Vector& u, std::shared_ptr<const OperatorPack> pack) {
    std::string key = key_of(u);
    std::lock_guard<std::mutex> lock(mutex_);
    if (index_.count(key) != 0) return;
    order_.emplace_front(key, std::move(pack));
    index_.emplace(std::move(key), order_.begin());
    while (order_.size() > capacity_) {
      index_.erase(order_.back().first);
      order_.pop_back();
    }
  }

 private:
  static std::string key_of(const Vector& u) {
    std::string key(static_cast<std::size_t>(u.size()) * sizeof(double), '\0');
    std::memcpy(key.data(), u.data(), key.size());
    return key;
  }

  using Entry = std::pair<std::string, std::shared_ptr<const OperatorPack>>;
  std::size_t capacity_;
  std::mutex mutex_;
  std::list<Entry> order_;
  std::unordered_map<std::string, std::list<Entry>::iterator> index_;
};

ProposalKernel::ProposalKernel(ProposalVariant variant, PriorSpec prior, double s)
    : variant_(variant), prior_(std::move(prior)), s_(s) {
  if (!(s >= 0.0) || !std::isfinite(s)) {
    std::ostringstream msg;
    msg << "step size s = " << s << " must be finite and non-negative";
    throw std::invalid_argument(msg.str());
  }
  const bool needs_unit = variant == ProposalVariant::kPcn || variant == ProposalVariant::kGpcn ||
                          variant == ProposalVariant::kLocalGpcn || variant == ProposalVariant::kLocalGpcn2;
  if (needs_unit && !(s < 1.0)) {
    std::ostringstream msg;
    msg << to_string(variant) << ": step size s = " << s << " outside [0, 1)";
    throw std::invalid_argument(msg.str());
  }
}

ProposalKernel ProposalKernel::rw(PriorSpec prior, double s) {
  return ProposalKernel(ProposalVariant::kRw, std::move(prior), s);
}

ProposalKernel ProposalKernel::pcn(PriorSpec prior, double s) {
  return ProposalKernel(ProposalVariant::kPcn, std::move(prior), s);
}

ProposalKernel ProposalKernel::gn_rw(PriorSpec prior, const Matrix& gamma, double s) {
  auto fac = std::make_shared<const GammaFactorization>(factorize_gamma(prior, gamma));
  return gn_rw(std::move(prior), std::move(fac), s);
}

ProposalKernel ProposalKernel::gn_rw(PriorSpec prior, std::shared_ptr<const GammaFactorization> fac,
                                     double s) {
  ProposalKernel k(ProposalVariant::kGnRw, std::move(prior), s);
  // C_Gamma and its factor do not depend on the pack's step size.
  k.pack_ = std::make_shared<const OperatorPack>(build_operator_pack(*fac, 0.0));
  return k;
}

ProposalKernel ProposalKernel::gpcn(PriorSpec prior, const Matrix& gamma, double s) {
  auto fac = std::make_shared<const GammaFactorization>(factorize_gamma(prior, gamma));
  return gpcn(std::move(prior), std::move(fac), s);
}

ProposalKernel ProposalKernel::gpcn(PriorSpec prior, std::shared_ptr<const GammaFactorization> fac,
                                    double s) {
  ProposalKernel k(ProposalVariant::kGpcn, std::move(prior), s);
  k.pack_ = std::make_shared<const OperatorPack>(build_operator_pack(*fac, s));
  return k;
}

ProposalKernel ProposalKernel::local_gpcn(PriorSpec prior, GammaMap gamma_map, double s) {
  if (!gamma_map) throw std::invalid_argument("local-gpcn: empty Gamma map");
  ProposalKernel k(ProposalVariant::kLocalGpcn, std::move(prior), s);
  k.gamma_map_ = std::move(gamma_map);
  return k;
}

ProposalKernel ProposalKernel::local_gpcn2(PriorSpec prior, GammaMap gamma_map, double s) {
  if (!gamma_map) throw std::invalid_argument("local-gpcn2: empty Gamma map");
  ProposalKernel k(ProposalVariant::kLocalGpcn2, std::move(prior), s);
  k.gamma_map_ = std::move(gamma_map);
  return k;
}

bool ProposalKernel::prior_reversible() const {
  return variant_ == ProposalVariant::kPcn || variant_ == ProposalVariant::kGpcn;
}

ProposalKernel ProposalKernel::with_pack_cache(std::size_t capacity) const {
  ProposalKernel copy = *this;
  copy.cache_ = capacity > 0 ? std::make_shared<PackCache>(capacity) : nullptr;
  return copy;
}

std::shared_ptr<const OperatorPack> ProposalKernel::local_pack(const Vector& u) const {
  if (!is_local()) throw std::logic_error("local_pack called on a global kernel");
  if (cache_) {
    if (auto hit = cache_->find(u)) return hit;
  }
  auto pack = std::make_shared<const OperatorPack>(build_operator_pack(prior_, gamma_map_(u), s_));
  if (cache_) cache_->insert(u, pack);
  return pack;
}

Vector ProposalKernel::mean(const Vector& u) const {
  const double a0 = std::sqrt(std::max(0.0, 1.0 - s_ * s_));
  switch (variant_) {
    case ProposalVariant::kRw:
    case ProposalVariant::kGnRw: return u;
    case ProposalVariant::kPcn:
    case ProposalVariant::kLocalGpcn2: return a0 * u;
    case ProposalVariant::kGpcn: return pack_->a * u;
    case ProposalVariant::kLocalGpcn: return local_pack(u)->a * u;
  }
  return u;
}

Vector ProposalKernel::apply(const Vector& u, const Vector& z) const {
  if (u.size() != dim() || z.size() != dim()) throw std::invalid_argument("proposal: dimension mismatch");
  const double a0 = std::sqrt(1.0 - std::min(1.0, s_ * s_));
  switch (variant_) {
    case ProposalVariant::kRw: return u + s_ * prior_.sqrt_eigenvalues().cwiseProduct(z);
    case ProposalVariant::kPcn: return a0 * u + s_ * prior_.sqrt_eigenvalues().cwiseProduct(z);
    case ProposalVariant::kGnRw: return u + s_ * (pack_->c_gamma_factor * z);
    case ProposalVariant::kGpcn: return pack_->a * u + s_ * (pack_->c_gamma_factor * z);
    case ProposalVariant::kLocalGpcn: {
      const auto p = local_pack(u);
      return p->a * u + s_ * (p->c_gamma_factor * z);
    }
    case ProposalVariant::kLocalGpcn2: {
      const auto p = local_pack(u);
      return a0 * u + s_ * (p->c_gamma_factor * z);
    }
  }
  return u;
}

Vector ProposalKernel::propose(const Vector& u, Rng& rng) const {
  return apply(u, standard_normal(rng, dim()));
}

double ProposalKernel::log_acceptance_correction(const Vector& u, const Vector& v) const {
  if (prior_reversible()) return 0.0;
  if (variant_ == ProposalVariant::kRw || variant_ == ProposalVariant::kGnRw) {
    // Symmetric proposals: only the prior density ratio remains.
    const Eigen::ArrayXd inv_c = prior_.eigenvalues().cwiseInverse().array();
    return 0.5 * (u.array().square() * inv_c).sum() - 0.5 * (v.array().square() * inv_c).sum();
  }
  if (!(s_ > 0.0)) {
    throw std::invalid_argument(std::string(to_string(variant_)) +
                                ": acceptance correction undefined for s = 0");
  }
  const auto pu = local_pack(u);
  const auto pv = local_pack(v);
  if (variant_ == ProposalVariant::kLocalGpcn) {
    return log_rho_gamma(*pu, u, v) - log_rho_gamma(*pv, v, u);
  }
  const double a0 = std::sqrt(1.0 - s_ * s_);
  return log_pi_gamma(*pu, (v - a0 * u) / s_) - log_pi_gamma(*pv, (u - a0 * v) / s_);
}

}  // namespace gpcn
