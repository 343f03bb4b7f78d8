#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gpcn/proposals.hpp"

namespace gpcn {

/// Potential Phi >= 0 (negative log-likelihood).
using Potential = std::function<double(const Vector&)>;

/// Target measure with density proportional to exp(-Phi) w.r.t. the prior.
struct Posterior {
  PriorSpec prior;
  Potential phi;
};

/// Scalar functional of the state recorded along a chain.
struct Qoi {
  std::string name;
  std::function<double(const Vector&)> fn;
};

struct ChainState {
  Vector x;
  double phi = 0.0;
};

struct StepResult {
  ChainState state;
  bool accepted = false;
  bool nonfinite = false;  // proposal had a non-finite potential
  bool escaped = false;    // proposal fell outside the restriction ball
};

/// One Metropolis transition. The candidate is accepted with probability
/// min{1, exp(Phi(u) - Phi(v) + correction)} * 1{||v|| < R}. A non-finite
/// Phi(v) counts as a rejection.
StepResult mh_step(const ProposalKernel& kernel, const Posterior& posterior, const ChainState& current,
                   Rng& rng, std::optional<double> radius = std::nullopt);

struct ChainConfig {
  ProposalKernel kernel;
  Posterior posterior;
  std::size_t n = 0;
  std::size_t n0 = 0;
  std::uint64_t seed = 0;
  std::optional<double> restriction_radius{};
  Vector initial_state{};
  std::vector<Qoi> qoi{};
  std::size_t thinning = 1;
  bool store_states = true;
};

struct ChainTrace {
  Matrix states;                 // retained states, one per row
  std::vector<bool> accepts;     // length n0 + n
  std::vector<std::vector<double>> qoi_series;  // one series of length n per functional
  std::vector<std::string> qoi_names;
  double acceptance_rate = 0.0;
  std::size_t nonfinite_count = 0;
  double max_state_norm = 0.0;
  std::uint64_t seed = 0;
  double wall_time_seconds = 0.0;
  Vector final_state;
};

/// Runs n0 burn-in plus n retained steps. Burn-in states are discarded but
/// their accept flags are kept. QoI are evaluated on every retained step;
/// states are stored every `thinning` steps when `store_states` is set.
ChainTrace run_chain(const ChainConfig& config);

/// Builds a kernel for a given step size; lets the tuner rebuild s-dependent
/// operators.
using KernelFactory = std::function<ProposalKernel(double s)>;

struct TuneResult {
  double s = 0.0;
  double pilot_rate = 0.0;
  bool at_boundary = false;  // target unattainable inside [s_min, s_max]
  int iterations = 0;
};

struct TuneOptions {
  double tolerance = 0.05;
  double s_min = 1e-4;
  double s_max = 0.999;
  int max_iterations = 40;
};

/// Bisection on log s for a pilot acceptance rate within +-tolerance of
/// `target_rate`. Each probe runs a separate pilot chain of length pilot_n
/// started from `initial_state`.
TuneResult tune_step_size(const KernelFactory& kernel_template, const Posterior& posterior,
                          double target_rate, std::size_t pilot_n, Rng& rng, const Vector& initial_state,
                          const TuneOptions& options = {});

/// Fraction of accepted steps in a pilot chain.
double pilot_acceptance(const ProposalKernel& kernel, const Posterior& posterior, std::size_t pilot_n,
                        Rng& rng, const Vector& initial_state);

}  // namespace gpcn
