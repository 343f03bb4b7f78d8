#include "gpcn/spectral_lab.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <Eigen/Householder>
#include <Eigen/QR>
#include <json.hpp>

#include "gpcn/gaussian_ops.hpp"

namespace gpcn::lab {

namespace {

constexpr double kStochasticTol = 1e-12;
constexpr double kInequalitySlack = 1e-10;
constexpr double kGapTol = 1e-12;

// Clamp the round-off negative diagonal that 1 - sum(row) can produce.
void fill_diagonal(Matrix& P) {
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    double off = 0.0;
    for (Eigen::Index j = 0; j < P.cols(); ++j) {
      if (j != i) off += P(i, j);
    }
    const double d = 1.0 - off;
    P(i, i) = (d < 0.0 && d > -kStochasticTol) ? 0.0 : d;
  }
}

void require_stochastic(const Matrix& P, const char* what) {
  if (P.rows() != P.cols() || P.rows() == 0) {
    throw std::invalid_argument(std::string(what) + ": matrix must be square and non-empty");
  }
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    for (Eigen::Index j = 0; j < P.cols(); ++j) {
      if (!std::isfinite(P(i, j)) || P(i, j) < 0.0) {
        std::ostringstream msg;
        msg << what << ": entry (" << i << ", " << j << ") = " << P(i, j) << " is not a probability";
        throw std::invalid_argument(msg.str());
      }
    }
    const double row = P.row(i).sum();
    if (std::abs(row - 1.0) > kStochasticTol) {
      std::ostringstream msg;
      msg << what << ": row " << i << " sums to " << row;
      throw std::invalid_argument(msg.str());
    }
  }
}

void require_reversible(const FiniteChain& chain, const char* what) {
  validate(chain);
  if (!is_reversible(chain)) {
    std::ostringstream msg;
    msg << what << ": chain is not reversible (detailed balance error " << detailed_balance_error(chain) << ")";
    throw std::invalid_argument(msg.str());
  }
}

Matrix symmetrized(const FiniteChain& chain) {
  const Vector r = chain.pi.cwiseSqrt();
  const Vector ri = r.cwiseInverse();
  Matrix S = r.asDiagonal() * chain.P * ri.asDiagonal();
  return 0.5 * (S + S.transpose());
}

// Orthonormal basis (columns) of the complement of sqrt(pi).
Matrix centered_basis(const Vector& pi) {
  const Eigen::Index n = pi.size();
  Matrix v = pi.cwiseSqrt();
  Eigen::HouseholderQR<Matrix> qr(v);
  Matrix Q = qr.householderQ();
  return Q.rightCols(n - 1);
}

struct CenteredEigen {
  Vector values;   // ascending
  Matrix vectors;  // in the symmetrized coordinates, n x (n - 1)
};

CenteredEigen centered_eigen(const FiniteChain& chain) {
  const Eigen::Index n = static_cast<Eigen::Index>(chain.n_states());
  CenteredEigen out;
  if (n == 1) {
    out.values.resize(0);
    out.vectors.resize(1, 0);
    return out;
  }
  const Matrix Q = centered_basis(chain.pi);
  Matrix Sc = Q.transpose() * symmetrized(chain) * Q;
  Sc = 0.5 * (Sc + Sc.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(Sc);
  out.values = es.eigenvalues();
  out.vectors = Q * es.eigenvectors();
  return out;
}

double operator_norm(const Vector& spectrum) {
  return spectrum.size() == 0 ? 0.0 : spectrum.cwiseAbs().maxCoeff();
}

void require_enumerable(std::size_t n, const char* what) {
  if (n > kMaxEnumerationStates) {
    std::ostringstream msg;
    msg << what << ": " << n << " states exceed the subset enumeration budget of " << kMaxEnumerationStates
        << " states (2^" << kMaxEnumerationStates << " subsets)";
    throw std::invalid_argument(msg.str());
  }
  if (n < 2) throw std::invalid_argument(std::string(what) + ": need at least 2 states");
}

enum class Extremum { kMin, kMax };

// Extremum over A with pi(A) in (0, 1/2] of sum_{i in A, j notin A} W_ij / pi(A).
// Gray-code walk: each step toggles one state and updates the flow in O(n);
// the running sums are recomputed from scratch periodically.
double enumerate_flow_ratio(const Matrix& W, const Vector& pi, Extremum mode) {
  const std::size_t n = static_cast<std::size_t>(pi.size());
  const std::uint64_t total = std::uint64_t{1} << n;
  std::vector<char> in(n, 0);
  double pi_a = 0.0;
  double flow = 0.0;
  double best = mode == Extremum::kMin ? std::numeric_limits<double>::infinity()
                                       : -std::numeric_limits<double>::infinity();

  auto recompute = [&] {
    pi_a = 0.0;
    flow = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!in[i]) continue;
      pi_a += pi(static_cast<Eigen::Index>(i));
      for (std::size_t j = 0; j < n; ++j) {
        if (!in[j]) flow += W(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      }
    }
  };

  for (std::uint64_t step = 1; step < total; ++step) {
    const auto k = static_cast<std::size_t>(std::countr_zero(step));
    const auto ki = static_cast<Eigen::Index>(k);
    if (!in[k]) {
      for (std::size_t i = 0; i < n; ++i) {
        if (in[i]) flow -= W(static_cast<Eigen::Index>(i), ki);
      }
      in[k] = 1;
      for (std::size_t j = 0; j < n; ++j) {
        if (!in[j]) flow += W(ki, static_cast<Eigen::Index>(j));
      }
      pi_a += pi(ki);
    } else {
      for (std::size_t j = 0; j < n; ++j) {
        if (!in[j]) flow -= W(ki, static_cast<Eigen::Index>(j));
      }
      in[k] = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (in[i]) flow += W(static_cast<Eigen::Index>(i), ki);
      }
      pi_a -= pi(ki);
    }
    if ((step & 4095u) == 0) recompute();
    if (pi_a <= 0.0 || pi_a > 0.5 + 1e-12) continue;
    const double ratio = std::max(flow, 0.0) / pi_a;
    best = mode == Extremum::kMin ? std::min(best, ratio) : std::max(best, ratio);
  }
  return best;
}

}  // namespace

void validate(const FiniteChain& chain) {
  require_stochastic(chain.P, "FiniteChain");
  if (chain.pi.size() != chain.P.rows()) throw std::invalid_argument("FiniteChain: pi and P sizes differ");
  if ((chain.pi.array() <= 0.0).any() || !chain.pi.allFinite()) {
    throw std::invalid_argument("FiniteChain: pi must be strictly positive");
  }
  if (std::abs(chain.pi.sum() - 1.0) > kStochasticTol) {
    throw std::invalid_argument("FiniteChain: pi must sum to 1");
  }
}

double detailed_balance_error(const FiniteChain& chain) {
  const Matrix F = chain.pi.asDiagonal() * chain.P;
  return (F - F.transpose()).cwiseAbs().maxCoeff();
}

bool is_reversible(const FiniteChain& chain, double tol) { return detailed_balance_error(chain) <= tol; }

FiniteChain discretize_metropolis(const Vector& target, const Matrix& q) {
  require_stochastic(q, "discretize_metropolis");
  if (target.size() != q.rows()) throw std::invalid_argument("discretize_metropolis: target and proposal sizes differ");
  if ((target.array() <= 0.0).any() || !target.allFinite()) {
    throw std::invalid_argument("discretize_metropolis: target must be strictly positive");
  }
  const Eigen::Index n = q.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if ((q(i, j) > 0.0) != (q(j, i) > 0.0)) {
        std::ostringstream msg;
        msg << "discretize_metropolis: proposal support is not symmetric at (" << i << ", " << j << ")";
        throw std::invalid_argument(msg.str());
      }
    }
  }
  FiniteChain chain;
  chain.pi = target / target.sum();
  chain.P = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j || q(i, j) == 0.0) continue;
      chain.P(i, j) = std::min(chain.pi(i) * q(i, j), chain.pi(j) * q(j, i)) / chain.pi(i);
    }
  }
  fill_diagonal(chain.P);
  return chain;
}

Vector centered_spectrum(const FiniteChain& chain) {
  require_reversible(chain, "centered_spectrum");
  return centered_eigen(chain).values;
}

double spectral_gap(const FiniteChain& chain) { return 1.0 - operator_norm(centered_spectrum(chain)); }

double largest_centered_eigenvalue(const FiniteChain& chain) {
  const Vector ev = centered_spectrum(chain);
  return ev.size() == 0 ? 0.0 : ev.maxCoeff();
}

double positivity_check(const FiniteChain& chain) {
  require_reversible(chain, "positivity_check");
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(chain), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double conductance(const FiniteChain& chain) {
  validate(chain);
  require_enumerable(chain.n_states(), "conductance");
  const Matrix W = chain.pi.asDiagonal() * chain.P;
  return enumerate_flow_ratio(W, chain.pi, Extremum::kMin);
}

CheegerReport cheeger_check(const FiniteChain& chain) {
  CheegerReport r;
  r.phi = conductance(chain);
  r.lambda = largest_centered_eigenvalue(chain);
  r.one_minus_lambda = 1.0 - r.lambda;
  r.lower = 0.5 * r.phi * r.phi;
  r.upper = 2.0 * r.phi;
  r.ok = r.lower <= r.one_minus_lambda + kInequalitySlack && r.one_minus_lambda <= r.upper + kInequalitySlack;
  return r;
}

double kappa_p(const Matrix& q1, const Matrix& q2, const Vector& target, double p) {
  require_stochastic(q1, "kappa_p");
  require_stochastic(q2, "kappa_p");
  if (q1.rows() != q2.rows() || target.size() != q1.rows()) throw std::invalid_argument("kappa_p: size mismatch");
  if (!(p > 1.0) || !std::isfinite(p)) throw std::invalid_argument("kappa_p: p must be a finite value > 1");
  if ((target.array() <= 0.0).any()) throw std::invalid_argument("kappa_p: target must be strictly positive");
  const Eigen::Index n = q1.rows();
  require_enumerable(static_cast<std::size_t>(n), "kappa_p");
  const Vector pi = target / target.sum();
  Matrix W = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j || q1(i, j) == 0.0) continue;
      if (q2(i, j) == 0.0) {
        std::ostringstream msg;
        msg << "kappa_p: q1 is not absolutely continuous w.r.t. q2 at (" << i << ", " << j << ")";
        throw std::invalid_argument(msg.str());
      }
      W(i, j) = std::pow(q1(i, j) / q2(i, j), p) * q2(i, j) * pi(i);
    }
  }
  return enumerate_flow_ratio(W, pi, Extremum::kMax);
}

Matrix lazify(const Matrix& q) {
  return 0.5 * (q + Matrix::Identity(q.rows(), q.cols()));
}

ComparisonReport comparison_check(const Vector& target, const Matrix& q1, const Matrix& q2, double p,
                                  bool lazify_if_needed) {
  ComparisonReport r;
  r.p = p;
  const FiniteChain m1 = discretize_metropolis(target, q1);
  const FiniteChain m2 = discretize_metropolis(target, q2);
  r.phi1 = conductance(m1);
  r.phi2 = conductance(m2);
  r.kappa = kappa_p(q1, q2, target, p);
  r.conductance_lhs = r.phi1;
  r.conductance_rhs = std::pow(r.kappa, 1.0 / p) * std::pow(r.phi2, (p - 1.0) / p);
  r.conductance_ok = r.conductance_lhs <= r.conductance_rhs + kInequalitySlack;

  FiniteChain g1 = m1;
  FiniteChain g2 = m2;
  Matrix p1 = q1;
  Matrix p2 = q2;
  r.min_eig1 = positivity_check(g1);
  r.min_eig2 = positivity_check(g2);
  const bool positive = r.min_eig1 >= -kInequalitySlack && r.min_eig2 >= -kInequalitySlack;
  if (!positive && lazify_if_needed) {
    r.lazified = true;
    p1 = lazify(q1);
    p2 = lazify(q2);
    g1 = discretize_metropolis(target, p1);
    g2 = discretize_metropolis(target, p2);
    r.min_eig1 = positivity_check(g1);
    r.min_eig2 = positivity_check(g2);
  }
  r.gap1 = spectral_gap(g1);
  r.gap2 = spectral_gap(g2);
  r.gap_kappa = r.lazified ? kappa_p(p1, p2, target, p) : r.kappa;
  r.gap_lhs = std::pow(0.5 * r.gap1, p);
  r.gap_rhs = r.gap_kappa * std::pow(2.0 * r.gap2, 0.5 * (p - 1.0));
  const bool preconditions = r.min_eig1 >= -kInequalitySlack && r.min_eig2 >= -kInequalitySlack;
  r.gap_ok = preconditions && r.gap_lhs <= r.gap_rhs + kInequalitySlack;
  return r;
}

RestrictionReport restrict_chain(const FiniteChain& chain, std::vector<std::size_t> subset) {
  validate(chain);
  if (subset.empty()) throw std::invalid_argument("restrict_chain: subset must be non-empty");
  std::sort(subset.begin(), subset.end());
  subset.erase(std::unique(subset.begin(), subset.end()), subset.end());
  const std::size_t n = chain.n_states();
  if (subset.back() >= n) {
    std::ostringstream msg;
    msg << "restrict_chain: state " << subset.back() << " out of range for " << n << " states";
    throw std::invalid_argument(msg.str());
  }

  const auto m = static_cast<Eigen::Index>(subset.size());
  RestrictionReport r;
  r.subset = subset;
  r.chain.P = Matrix::Zero(m, m);
  r.chain.pi.resize(m);
  for (Eigen::Index a = 0; a < m; ++a) {
    const auto i = static_cast<Eigen::Index>(subset[static_cast<std::size_t>(a)]);
    r.chain.pi(a) = chain.pi(i);
    double inside = 0.0;
    for (Eigen::Index b = 0; b < m; ++b) {
      const auto j = static_cast<Eigen::Index>(subset[static_cast<std::size_t>(b)]);
      r.chain.P(a, b) = chain.P(i, j);
      inside += chain.P(i, j);
    }
    const double escape = std::max(0.0, 1.0 - inside);
    r.chain.P(a, a) += escape;
    r.max_escape = std::max(r.max_escape, escape);
  }
  r.chain.pi /= r.chain.pi.sum();

  r.reversible = is_reversible(r.chain);
  if (is_reversible(chain)) {
    r.norm_full = operator_norm(centered_eigen(chain).values);
    r.full_positive = positivity_check(chain) >= -kInequalitySlack;
  }
  if (r.reversible) {
    r.norm_restricted = operator_norm(centered_eigen(r.chain).values);
    r.restricted_positive = positivity_check(r.chain) >= -kInequalitySlack;
  }
  r.norm_ok = r.reversible && r.norm_restricted <= r.norm_full + r.max_escape + kInequalitySlack;
  return r;
}

AsymptoticVarianceReport asymptotic_variance(const FiniteChain& chain, const Vector& f) {
  require_reversible(chain, "asymptotic_variance");
  if (f.size() != chain.pi.size()) throw std::invalid_argument("asymptotic_variance: f has the wrong length");
  const CenteredEigen eig = centered_eigen(chain);
  AsymptoticVarianceReport r;
  r.gap = 1.0 - operator_norm(eig.values);
  if (!(r.gap > kGapTol)) {
    std::ostringstream msg;
    msg << "asymptotic_variance: spectral gap " << r.gap << " is not positive";
    throw std::invalid_argument(msg.str());
  }
  const double mean = chain.pi.dot(f);
  const Vector g = chain.pi.cwiseSqrt().cwiseProduct(f.array().matrix() - Vector::Constant(f.size(), mean));
  r.variance = g.squaredNorm();
  const Vector c = eig.vectors.transpose() * g;
  for (Eigen::Index k = 0; k < c.size(); ++k) {
    const double l = eig.values(k);
    r.sigma2 += (1.0 + l) / (1.0 - l) * c(k) * c(k);
  }
  r.sigma2 = std::max(r.sigma2, 0.0);
  r.bound = 2.0 * r.variance / r.gap;
  r.bound_ok = r.sigma2 <= r.bound * (1.0 + kInequalitySlack) + kInequalitySlack;
  return r;
}

Vector random_distribution(Rng& rng, std::size_t n) {
  if (n == 0) throw std::invalid_argument("random_distribution: n must be positive");
  Vector w = standard_normal(rng, static_cast<Eigen::Index>(n)).array().exp();
  return w / w.sum();
}

Matrix random_reversible_proposal(Rng& rng, const Vector& reference, double edge_probability) {
  const Eigen::Index n = reference.size();
  Matrix W = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double w = 0.05 + uniform01(rng);
      const bool keep = j == i + 1 || uniform01(rng) < edge_probability;
      if (keep) W(i, j) = W(j, i) = w;
    }
  }
  double z = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) z = std::max(z, W.row(i).sum() / reference(i));
  z *= 1.0 + 0.5 * uniform01(rng);
  Matrix q = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j) q(i, j) = W(i, j) / (reference(i) * z);
    }
  }
  fill_diagonal(q);
  return q;
}

FiniteChain random_reversible_chain(Rng& rng, std::size_t n) {
  FiniteChain chain;
  chain.pi = random_distribution(rng, n);
  chain.P = random_reversible_proposal(rng, chain.pi);
  return chain;
}

GridGpcn grid_gpcn_metropolis(std::size_t n_points, double prior_variance, double gamma, double s,
                              const std::function<double(double)>& phi) {
  if (n_points < 2) throw std::invalid_argument("grid_gpcn_metropolis: need at least 2 grid points");
  if (!(s > 0.0 && s < 1.0)) throw std::invalid_argument("grid_gpcn_metropolis: s must lie in (0, 1)");
  const PriorSpec prior(Vector::Constant(1, prior_variance));
  const OperatorPack pack = build_operator_pack(prior, Matrix::Constant(1, 1, gamma), s);

  GridGpcn out;
  out.mean_coefficient = pack.a(0, 0);
  out.proposal_variance = s * s * pack.c_gamma(0, 0);
  const auto n = static_cast<Eigen::Index>(n_points);
  const double half_width = 3.0 * std::sqrt(prior_variance);
  out.grid = Vector::LinSpaced(n, -half_width, half_width);

  // Joint law of (u, v) under the proposal started at the reference is
  // symmetric, so W is symmetric and q = W / rowsum is reversible w.r.t. rowsum.
  Matrix W(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double x = out.grid(i), y = out.grid(j);
      W(i, j) = std::exp(-(x * x + y * y - 2.0 * out.mean_coefficient * x * y) / (2.0 * out.proposal_variance));
    }
  }
  W = 0.5 * (W + W.transpose());
  out.reference = W.rowwise().sum();
  out.proposal = out.reference.cwiseInverse().asDiagonal() * W;
  out.reference /= out.reference.sum();

  Vector target(n);
  for (Eigen::Index i = 0; i < n; ++i) target(i) = out.reference(i) * std::exp(-phi(out.grid(i)));
  out.chain = discretize_metropolis(target, out.proposal);
  return out;
}

bool LabInstance::ok() const {
  return detailed_balance_ok && cheeger1.ok && cheeger2.ok && comparison.ok() && restriction.norm_ok &&
         restriction.reversible && asymptotic.bound_ok && positivity_ok;
}

bool LabReport::all_pass() const {
  return std::all_of(instances.begin(), instances.end(), [](const LabInstance& i) { return i.ok(); });
}

LabReport run_lab(const LabOptions& options) {
  if (options.max_states > kMaxEnumerationStates) {
    std::ostringstream msg;
    msg << "lab: " << options.max_states << " states exceed the subset enumeration budget of "
        << kMaxEnumerationStates << " states";
    throw std::invalid_argument(msg.str());
  }
  if (options.min_states < 2 || options.min_states > options.max_states) {
    throw std::invalid_argument("lab: need 2 <= min_states <= max_states");
  }
  if (options.n_instances == 0) throw std::invalid_argument("lab: n_instances must be positive");
  if (!(options.p > 1.0)) throw std::invalid_argument("lab: p must exceed 1");

  LabReport report;
  report.options = options;
  for (std::size_t k = 0; k < options.n_instances; ++k) {
    LabInstance inst;
    inst.seed = split_seed(options.seed, Stream::kLab, k);
    Rng rng(inst.seed);
    const std::size_t span = options.max_states - options.min_states + 1;
    inst.n_states = options.min_states + static_cast<std::size_t>(rng() % span);
    const auto n = static_cast<Eigen::Index>(inst.n_states);

    const Vector reference = random_distribution(rng, inst.n_states);
    Vector target(n);
    for (Eigen::Index i = 0; i < n; ++i) target(i) = reference(i) * std::exp(-3.0 * uniform01(rng));
    target /= target.sum();
    // Sparse q1 makes non-positive chains (and hence the lazified branch) common.
    const Matrix q1 = random_reversible_proposal(rng, reference, 0.4);
    const Matrix q2 = random_reversible_proposal(rng, reference);
    const FiniteChain m1 = discretize_metropolis(target, q1);
    const FiniteChain m2 = discretize_metropolis(target, q2);
    inst.detailed_balance = std::max(detailed_balance_error(m1), detailed_balance_error(m2));
    inst.detailed_balance_ok = inst.detailed_balance < 1e-12;
    inst.cheeger1 = cheeger_check(m1);
    inst.cheeger2 = cheeger_check(m2);
    inst.comparison = comparison_check(target, q1, q2, options.p);

    std::vector<std::size_t> subset;
    for (std::size_t i = 0; i < inst.n_states; ++i) {
      if (uniform01(rng) < 0.6) subset.push_back(i);
    }
    if (subset.empty()) subset.push_back(static_cast<std::size_t>(rng() % inst.n_states));
    inst.restriction = restrict_chain(m1, subset);

    const Vector f = standard_normal(rng, n);
    inst.asymptotic = asymptotic_variance(m1, f);

    const double gamma = std::exp(-2.0 + 5.0 * uniform01(rng));
    const double s = 0.1 + 0.85 * uniform01(rng);
    const double y = standard_normal(rng, 1)(0);
    const auto grid_phi = [y](double x) {
      const double r = y - x - 0.3 * x * x * x;
      return r * r / (2.0 * 0.25);
    };
    const GridGpcn grid = grid_gpcn_metropolis(options.grid_points, 1.0, gamma, s, grid_phi);
    inst.grid_min_eigenvalue = positivity_check(grid.chain);
    inst.positivity_ok = inst.grid_min_eigenvalue >= -1e-10;

    report.instances.push_back(std::move(inst));
  }
  return report;
}

std::string lab_report_to_json(const LabReport& report) {
  using nlohmann::ordered_json;
  ordered_json root;
  root["seed"] = report.options.seed;
  root["n_instances"] = report.options.n_instances;
  root["min_states"] = report.options.min_states;
  root["max_states"] = report.options.max_states;
  root["p"] = report.options.p;
  root["grid_points"] = report.options.grid_points;
  root["all_pass"] = report.all_pass();
  ordered_json arr = ordered_json::array();
  for (const auto& inst : report.instances) {
    ordered_json j;
    j["seed"] = inst.seed;
    j["n_states"] = inst.n_states;
    j["ok"] = inst.ok();
    j["detailed_balance"] = {{"max_error", inst.detailed_balance}, {"ok", inst.detailed_balance_ok}};
    auto cheeger = [](const CheegerReport& c) {
      return ordered_json{{"phi", c.phi},     {"lambda", c.lambda}, {"lower", c.lower},
                          {"one_minus_lambda", c.one_minus_lambda}, {"upper", c.upper}, {"ok", c.ok}};
    };
    j["cheeger"] = ordered_json::array({cheeger(inst.cheeger1), cheeger(inst.cheeger2)});
    const auto& c = inst.comparison;
    j["comparison"] = {{"p", c.p},
                       {"phi1", c.phi1},
                       {"phi2", c.phi2},
                       {"kappa", c.kappa},
                       {"conductance_lhs", c.conductance_lhs},
                       {"conductance_rhs", c.conductance_rhs},
                       {"conductance_ok", c.conductance_ok},
                       {"lazified", c.lazified},
                       {"min_eig1", c.min_eig1},
                       {"min_eig2", c.min_eig2},
                       {"gap1", c.gap1},
                       {"gap2", c.gap2},
                       {"gap_kappa", c.gap_kappa},
                       {"gap_lhs", c.gap_lhs},
                       {"gap_rhs", c.gap_rhs},
                       {"gap_ok", c.gap_ok}};
    const auto& r = inst.restriction;
    j["restriction"] = {{"subset", r.subset},
                        {"norm_restricted", r.norm_restricted},
                        {"norm_full", r.norm_full},
                        {"max_escape", r.max_escape},
                        {"reversible", r.reversible},
                        {"ok", r.norm_ok}};
    const auto& a = inst.asymptotic;
    j["asymptotic_variance"] = {{"sigma2", a.sigma2}, {"variance", a.variance}, {"gap", a.gap},
                                {"bound", a.bound},   {"ok", a.bound_ok}};
    j["grid_positivity"] = {{"min_eigenvalue", inst.grid_min_eigenvalue}, {"ok", inst.positivity_ok}};
    arr.push_back(std::move(j));
  }
  root["instances"] = std::move(arr);
  return root.dump(2);
}

}  // namespace gpcn::lab
