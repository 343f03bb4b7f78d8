#include "gpcn/metropolis.hpp"

#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace gpcn {

StepResult mh_step(const ProposalKernel& kernel, const Posterior& posterior, const ChainState& current,
                   Rng& rng, std::optional<double> radius) {
  StepResult out;
  out.state = current;

  Vector v = kernel.propose(current.x, rng);
  if (radius && !(v.norm() < *radius)) {
    out.escaped = true;
    return out;
  }
  const double phi_v = posterior.phi(v);
  if (!std::isfinite(phi_v)) {
    out.nonfinite = true;
    return out;
  }
  const double log_alpha = current.phi - phi_v + kernel.log_acceptance_correction(current.x, v);
  bool accept = log_alpha >= 0.0;
  if (!accept && std::isfinite(log_alpha)) accept = std::log(uniform01(rng)) < log_alpha;
  if (accept) {
    out.state.x = std::move(v);
    out.state.phi = phi_v;
    out.accepted = true;
  }
  return out;
}

ChainTrace run_chain(const ChainConfig& config) {
  const auto& kernel = config.kernel;
  const auto& posterior = config.posterior;
  if (config.initial_state.size() != kernel.dim()) {
    throw std::invalid_argument("run_chain: initial state dimension does not match the kernel");
  }
  if (config.thinning == 0) throw std::invalid_argument("run_chain: thinning must be >= 1");
  if (config.restriction_radius) {
    if (!(*config.restriction_radius > 0.0)) {
      throw std::invalid_argument("run_chain: restriction radius must be positive");
    }
    if (!(config.initial_state.norm() < *config.restriction_radius)) {
      std::ostringstream msg;
      msg << "run_chain: initial state norm " << config.initial_state.norm()
          << " violates the restriction radius " << *config.restriction_radius;
      throw std::invalid_argument(msg.str());
    }
  }

  const auto start = std::chrono::steady_clock::now();
  Rng rng(config.seed);
  ChainTrace trace;
  trace.seed = config.seed;
  trace.accepts.reserve(config.n0 + config.n);
  trace.qoi_names.reserve(config.qoi.size());
  for (const auto& q : config.qoi) trace.qoi_names.push_back(q.name);
  trace.qoi_series.assign(config.qoi.size(), {});
  for (auto& series : trace.qoi_series) series.reserve(config.n);
  if (config.store_states) {
    const std::size_t rows = (config.n + config.thinning - 1) / config.thinning;
    trace.states.resize(static_cast<Eigen::Index>(rows), kernel.dim());
  }

  ChainState state{config.initial_state, posterior.phi(config.initial_state)};
  if (!std::isfinite(state.phi)) throw std::invalid_argument("run_chain: Phi is not finite at the initial state");
  trace.max_state_norm = state.x.norm();

  // QoI values only change on acceptance.
  std::vector<double> qoi_values(config.qoi.size());
  auto refresh_qoi = [&] {
    for (std::size_t q = 0; q < config.qoi.size(); ++q) qoi_values[q] = config.qoi[q].fn(state.x);
  };
  bool qoi_stale = true;

  std::size_t accepted = 0;
  const std::size_t total = config.n0 + config.n;
  for (std::size_t step = 0; step < total; ++step) {
    StepResult r = mh_step(kernel, posterior, state, rng, config.restriction_radius);
    trace.accepts.push_back(r.accepted);
    if (r.nonfinite) ++trace.nonfinite_count;
    if (r.accepted) {
      ++accepted;
      state = std::move(r.state);
      qoi_stale = true;
      trace.max_state_norm = std::max(trace.max_state_norm, state.x.norm());
    }
    if (step < config.n0) continue;
    const std::size_t kept = step - config.n0;
    if (!config.qoi.empty()) {
      if (qoi_stale) {
        refresh_qoi();
        qoi_stale = false;
      }
      for (std::size_t q = 0; q < config.qoi.size(); ++q) trace.qoi_series[q].push_back(qoi_values[q]);
    }
    if (config.store_states && kept % config.thinning == 0) {
      trace.states.row(static_cast<Eigen::Index>(kept / config.thinning)) = state.x.transpose();
    }
  }

  trace.acceptance_rate = total > 0 ? static_cast<double>(accepted) / static_cast<double>(total) : 0.0;
  trace.final_state = state.x;
  trace.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return trace;
}

double pilot_acceptance(const ProposalKernel& kernel, const Posterior& posterior, std::size_t pilot_n,
                        Rng& rng, const Vector& initial_state) {
  ChainState state{initial_state, posterior.phi(initial_state)};
  std::size_t accepted = 0;
  for (std::size_t i = 0; i < pilot_n; ++i) {
    StepResult r = mh_step(kernel, posterior, state, rng);
    if (r.accepted) {
      ++accepted;
      state = std::move(r.state);
    }
  }
  return pilot_n > 0 ? static_cast<double>(accepted) / static_cast<double>(pilot_n) : 0.0;
}

TuneResult tune_step_size(const KernelFactory& kernel_template, const Posterior& posterior,
                          double target_rate, std::size_t pilot_n, Rng& rng, const Vector& initial_state,
                          const TuneOptions& options) {
  if (!(target_rate > 0.0 && target_rate < 1.0)) {
    throw std::invalid_argument("tune_step_size: target rate must lie in (0, 1)");
  }
  if (pilot_n < 1000) throw std::invalid_argument("tune_step_size: pilot_n must be >= 1000");

  auto rate_at = [&](double s) {
    return pilot_acceptance(kernel_template(s), posterior, pilot_n, rng, initial_state);
  };
  auto within = [&](double rate) { return std::abs(rate - target_rate) <= options.tolerance; };

  TuneResult out;
  // Acceptance decreases in s: the largest step is tried first.
  double rate_hi = rate_at(options.s_max);
  out.iterations = 1;
  if (within(rate_hi) || rate_hi > target_rate) {
    out.s = options.s_max;
    out.pilot_rate = rate_hi;
    out.at_boundary = !within(rate_hi);
    return out;
  }
  double rate_lo = rate_at(options.s_min);
  out.iterations = 2;
  if (within(rate_lo) || rate_lo < target_rate) {
    out.s = options.s_min;
    out.pilot_rate = rate_lo;
    out.at_boundary = !within(rate_lo);
    return out;
  }

  double lo = std::log(options.s_min), hi = std::log(options.s_max);
  double best_s = options.s_min, best_rate = rate_lo;
  while (out.iterations < options.max_iterations) {
    const double mid = 0.5 * (lo + hi);
    const double s = std::exp(mid);
    const double rate = rate_at(s);
    ++out.iterations;
    if (std::abs(rate - target_rate) < std::abs(best_rate - target_rate)) {
      best_s = s;
      best_rate = rate;
    }
    if (within(rate)) break;
    if (rate > target_rate)
      lo = mid;
    else
      hi = mid;
  }
  out.s = best_s;
  out.pilot_rate = best_rate;
  out.at_boundary = false;
  return out;
}

}  // namespace gpcn
