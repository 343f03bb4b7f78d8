#pragma once

// Experiment harness for the elliptic inverse problem: builds the posterior,
// Gamma and MAP point for each (N, sigma_eps) cell, tunes and runs the
// samplers, and writes traces, diagnostics and a summary table.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "gpcn/config.hpp"
#include "gpcn/diagnostics.hpp"
#include "gpcn/elliptic.hpp"
#include "gpcn/metropolis.hpp"
#include "gpcn/spectral_lab.hpp"

namespace gpcn {

struct Problem {
  long n_modes = 0;
  double sigma_eps = 0.0;
  std::shared_ptr<const elliptic::ForwardModel> model;
  PriorSpec prior{Vector::Ones(1)};
  elliptic::Observation obs;
  elliptic::MapResult map;
  Matrix gamma;
  std::shared_ptr<const GammaFactorization> factorization;

  Posterior posterior() const;
};

/// Data, MAP estimate and Gamma for one cell. Depends only on the problem
/// section of the configuration, the sampler Gamma source and (N, sigma_eps).
Problem build_problem(const ExperimentConfig& config, long n_modes, double sigma_eps);

/// Proposal for `variant` at step size s, using the problem's Gamma.
ProposalKernel make_kernel(ProposalVariant variant, const Problem& problem, double s);

struct CellResult {
  ProposalVariant variant = ProposalVariant::kGpcn;
  long n_modes = 0;
  double sigma_eps = 0.0;
  std::uint64_t seed = 0;
  double s = 0.0;
  bool tuned = false;
  bool tune_at_boundary = false;
  double pilot_rate = 0.0;
  double acceptance_rate = 0.0;
  std::size_t nonfinite_count = 0;
  double wall_time_seconds = 0.0;
  DiagnosticsReport ims;
  DiagnosticsReport batch_means;
  ChainTrace trace;

  std::string name() const;
};

/// Tunes (unless config.s is set) and runs one chain. Tuning and chain
/// randomness come from separate streams of `seed`.
CellResult run_cell(const ExperimentConfig& config, const Problem& problem, ProposalVariant variant,
                    std::uint64_t seed);

/// Runs fn(0), ..., fn(count - 1) on up to `threads` worker threads (0 means
/// hardware concurrency). The first exception is rethrown after all workers stop.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn);

struct RunOutputs {
  std::vector<CellResult> cells;
  std::vector<std::filesystem::path> files;
};

/// Sweeps variant x N x sigma_eps x seed and writes the declared outputs into
/// config.out_dir. Progress lines go to `log` when non-null.
RunOutputs cmd_run(const ExperimentConfig& config, std::size_t threads = 1, std::ostream* log = nullptr);

struct MapOutput {
  long n_modes = 0;
  double sigma_eps = 0.0;
  Vector xi_map;
  Matrix gamma;
  double phi_map = 0.0;
  bool converged = false;
  std::vector<std::filesystem::path> files;
};

/// Writes xi_MAP and Gamma (17-digit CSV), the observation (JSON) and a MAP
/// summary for every (N, sigma_eps) pair.
std::vector<MapOutput> cmd_map(const ExperimentConfig& config);

/// Diagnostics JSON for every QoI column of a trace CSV.
std::string cmd_diagnose(const std::filesystem::path& trace_path);

/// Lab verification report JSON.
std::string cmd_lab(std::uint64_t seed, std::size_t n_instances, std::size_t max_states);

}  // namespace gpcn
