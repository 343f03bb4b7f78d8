#include "gpcn/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "gpcn/trace_io.hpp"

namespace gpcn {

namespace {

std::string short_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

std::string cell_stem(long n_modes, double sigma) {
  return "N" + std::to_string(n_modes) + "_sigma" + short_double(sigma);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (text.empty() || text.back() != '\n') out << '\n';
}

nlohmann::ordered_json config_json(const ExperimentConfig& config) {
  nlohmann::ordered_json j;
  for (const auto& line : resolved_lines(config)) {
    const auto eq = line.find(" = ");
    j[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return j;
}

Matrix averaged_gamma(const ExperimentConfig& config, const Problem& p) {
  Matrix sum = Matrix::Zero(p.n_modes, p.n_modes);
  std::uint64_t prior_draws = 0;
  for (const auto& point : config.gamma_points) {
    Vector xi;
    if (point == "map") {
      xi = p.map.xi;
    } else if (point == "zero") {
      xi = Vector::Zero(p.n_modes);
    } else {
      Rng rng(split_seed(config.data_seed, Stream::kData, 1 + prior_draws++));
      xi = p.prior.sample(rng);
    }
    sum += elliptic::gamma_from_jacobian(p.model->jacobian(xi), p.sigma_eps);
  }
  sum /= static_cast<double>(config.gamma_points.size());
  return 0.5 * (sum + sum.transpose());
}

std::size_t variant_index(ProposalVariant v) { return static_cast<std::size_t>(v); }

}  // namespace

Posterior Problem::posterior() const {
  auto m = model;
  auto o = obs;
  return Posterior{prior, [m, o](const Vector& xi) { return elliptic::phi(xi, o, *m); }};
}

Problem build_problem(const ExperimentConfig& config, long n_modes, double sigma_eps) {
  Problem p;
  p.n_modes = n_modes;
  p.sigma_eps = sigma_eps;
  p.model = std::make_shared<const elliptic::ForwardModel>(n_modes, config.dx_exponent);
  p.prior = PriorSpec::inverse_square(n_modes);
  const auto truth = elliptic::TruthSpec::sine(config.truth_amplitude, config.truth_frequency);
  p.obs = elliptic::generate_data(truth, sigma_eps, *p.model, split_seed(config.data_seed, Stream::kData, 0));
  p.map = elliptic::map_estimate(p.obs, *p.model, p.prior);
  switch (config.gamma) {
    case GammaSource::kMap: p.gamma = elliptic::build_gamma_from_map(p.map.xi, p.obs, *p.model); break;
    case GammaSource::kZero: p.gamma = Matrix::Zero(n_modes, n_modes); break;
    case GammaSource::kAveraged: p.gamma = averaged_gamma(config, p); break;
  }
  p.factorization = std::make_shared<const GammaFactorization>(factorize_gamma(p.prior, p.gamma));
  return p;
}

ProposalKernel make_kernel(ProposalVariant variant, const Problem& problem, double s) {
  switch (variant) {
    case ProposalVariant::kRw: return ProposalKernel::rw(problem.prior, s);
    case ProposalVariant::kPcn: return ProposalKernel::pcn(problem.prior, s);
    case ProposalVariant::kGnRw: return ProposalKernel::gn_rw(problem.prior, problem.factorization, s);
    case ProposalVariant::kGpcn: return ProposalKernel::gpcn(problem.prior, problem.factorization, s);
    case ProposalVariant::kLocalGpcn:
    case ProposalVariant::kLocalGpcn2: {
      auto model = problem.model;
      const double sigma = problem.sigma_eps;
      GammaMap gamma_map = [model, sigma](const Vector& xi) {
        return elliptic::gamma_from_jacobian(model->jacobian(xi), sigma);
      };
      auto k = variant == ProposalVariant::kLocalGpcn ? ProposalKernel::local_gpcn(problem.prior, gamma_map, s)
                                                      : ProposalKernel::local_gpcn2(problem.prior, gamma_map, s);
      return k.with_pack_cache(8);
    }
  }
  throw std::invalid_argument("make_kernel: unknown variant");
}

std::string CellResult::name() const {
  return std::string(to_string(variant)) + "_" + cell_stem(n_modes, sigma_eps) + "_seed" + std::to_string(seed);
}

CellResult run_cell(const ExperimentConfig& config, const Problem& problem, ProposalVariant variant,
                    std::uint64_t seed) {
  CellResult r;
  r.variant = variant;
  r.n_modes = problem.n_modes;
  r.sigma_eps = problem.sigma_eps;
  r.seed = seed;
  const auto t0 = std::chrono::steady_clock::now();

  const Posterior post = problem.posterior();
  const Vector x0 = config.initial == "map" ? problem.map.xi : Vector::Zero(problem.n_modes);
  if (config.s) {
    r.s = *config.s;
  } else {
    Rng tune_rng(split_seed(seed, Stream::kTuning, variant_index(variant)));
    TuneOptions opts;
    opts.tolerance = config.tune_tolerance;
    const bool bounded = variant != ProposalVariant::kRw && variant != ProposalVariant::kGnRw;
    opts.s_max = bounded ? 0.999 : 10.0;
    const auto tuned = tune_step_size([&](double s) { return make_kernel(variant, problem, s); }, post,
                                      config.target_acceptance, config.pilot_n, tune_rng, x0, opts);
    r.s = tuned.s;
    r.tuned = true;
    r.tune_at_boundary = tuned.at_boundary;
    r.pilot_rate = tuned.pilot_rate;
  }

  ChainConfig cc{.kernel = make_kernel(variant, problem, r.s), .posterior = post};
  cc.n = config.n;
  cc.n0 = config.n0;
  cc.seed = split_seed(seed, Stream::kChain, variant_index(variant));
  cc.restriction_radius = config.restriction_radius;
  cc.initial_state = x0;
  auto model = problem.model;
  cc.qoi = {Qoi{"exp_integral", [model](const Vector& xi) { return qoi_exp_integral(xi, *model); }}};
  cc.thinning = config.thin;
  cc.store_states = config.has_format("states");
  r.trace = run_chain(cc);
  r.acceptance_rate = r.trace.acceptance_rate;
  r.nonfinite_count = r.trace.nonfinite_count;

  const auto& series = r.trace.qoi_series.front();
  r.ims = ess_ims(series);
  r.ims.n0 = config.n0;
  r.batch_means = ess_batch_means(series, std::min<std::size_t>(100, series.size() / 10));
  r.batch_means.n0 = config.n0;
  r.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        {
          std::lock_guard lock(error_mutex);
          if (error) return;
        }
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

RunOutputs cmd_run(const ExperimentConfig& config, std::size_t threads, std::ostream* log) {
  const std::filesystem::path dir(config.out_dir);
  std::filesystem::create_directories(dir);
  const auto header = resolved_lines(config);

  struct Key {
    long n;
    double sigma;
  };
  std::vector<Key> keys;
  for (long n : config.n_modes) {
    for (double s : config.sigma_eps) keys.push_back({n, s});
  }
  std::vector<Problem> problems(keys.size());
  parallel_for(keys.size(), threads, [&](std::size_t i) {
    problems[i] = build_problem(config, keys[i].n, keys[i].sigma);
  });

  struct Cell {
    std::size_t problem;
    ProposalVariant variant;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (std::size_t p = 0; p < problems.size(); ++p) {
    for (auto v : config.variants) {
      for (auto seed : config.seeds) cells.push_back({p, v, seed});
    }
  }

  RunOutputs out;
  out.cells.resize(cells.size());
  std::vector<std::vector<std::filesystem::path>> files(cells.size());
  std::mutex log_mutex;
  parallel_for(cells.size(), threads, [&](std::size_t i) {
    const auto& cell = cells[i];
    CellResult r = run_cell(config, problems[cell.problem], cell.variant, cell.seed);
    const std::string name = r.name();
    std::vector<std::string> comments = header;
    comments.push_back("cell.variant = " + std::string(to_string(r.variant)));
    comments.push_back("cell.N = " + std::to_string(r.n_modes));
    comments.push_back("cell.sigma_eps = " + format_double(r.sigma_eps));
    comments.push_back("cell.seed = " + std::to_string(r.seed));
    comments.push_back("cell.s = " + format_double(r.s));
    if (config.has_format("csv")) {
      const auto path = dir / ("trace_" + name + ".csv");
      write_trace_csv(path, r.trace, config.n0, comments);
      files[i].push_back(path);
    }
    if (config.has_format("states")) {
      const auto path = dir / ("states_" + name + ".bin");
      write_state_dump(path, r.trace.states);
      files[i].push_back(path);
    }
    if (config.has_format("json")) {
      nlohmann::ordered_json j;
      j["config"] = config_json(config);
      j["cell"] = {{"variant", std::string(to_string(r.variant))},
                   {"N", r.n_modes},
                   {"sigma_eps", r.sigma_eps},
                   {"seed", r.seed}};
      j["tuning"] = {{"s", r.s}, {"tuned", r.tuned}, {"pilot_rate", r.pilot_rate}, {"at_boundary", r.tune_at_boundary}};
      j["acceptance_rate"] = r.acceptance_rate;
      j["nonfinite_count"] = r.nonfinite_count;
      j["wall_time_seconds"] = r.wall_time_seconds;
      j["diagnostics"] = nlohmann::ordered_json::array(
          {nlohmann::ordered_json::parse(report_to_json(r.ims, "exp_integral")),
           nlohmann::ordered_json::parse(report_to_json(r.batch_means, "exp_integral"))});
      const auto path = dir / ("diagnostics_" + name + ".json");
      write_text(path, j.dump(2));
      files[i].push_back(path);
    }
    if (log) {
      std::lock_guard lock(log_mutex);
      *log << name << ": s = " << r.s << ", acceptance = " << r.acceptance_rate << ", ESS = " << r.ims.ess
           << " (IMS), " << r.batch_means.ess << " (batch means)\n";
    }
    if (!config.has_format("states")) r.trace.states.resize(0, 0);
    out.cells[i] = std::move(r);
  });
  for (auto& f : files) out.files.insert(out.files.end(), f.begin(), f.end());

  if (config.has_format("csv")) {
    std::ostringstream csv;
    for (const auto& line : header) csv << "# " << line << "\n";
    csv << "variant,N,sigma_eps,seed,s,tuned,acceptance_rate,ess_ims,ess_batch_means,iact_ims,iact_batch_means,"
           "wall_time_seconds\n";
    for (const auto& r : out.cells) {
      csv << to_string(r.variant) << ',' << r.n_modes << ',' << format_double(r.sigma_eps) << ',' << r.seed << ','
          << format_double(r.s) << ',' << (r.tuned ? 1 : 0) << ',' << format_double(r.acceptance_rate) << ','
          << format_double(r.ims.ess) << ',' << format_double(r.batch_means.ess) << ',' << format_double(r.ims.iact)
          << ',' << format_double(r.batch_means.iact) << ',' << format_double(r.wall_time_seconds) << "\n";
    }
    const auto path = dir / "summary.csv";
    write_text(path, csv.str());
    out.files.push_back(path);
  }
  return out;
}

std::vector<MapOutput> cmd_map(const ExperimentConfig& config) {
  const std::filesystem::path dir(config.out_dir);
  std::filesystem::create_directories(dir);
  const auto header = resolved_lines(config);
  std::vector<MapOutput> outputs;
  for (long n : config.n_modes) {
    for (double sigma : config.sigma_eps) {
      const Problem p = build_problem(config, n, sigma);
      MapOutput m;
      m.n_modes = n;
      m.sigma_eps = sigma;
      m.xi_map = p.map.xi;
      m.gamma = p.gamma;
      m.phi_map = elliptic::phi(p.map.xi, p.obs, *p.model);
      m.converged = p.map.converged;
      const std::string stem = "map_" + cell_stem(n, sigma);

      const auto xi_path = dir / (stem + "_xi.csv");
      write_matrix_csv(xi_path, Matrix(m.xi_map), header);
      const auto gamma_path = dir / (stem + "_gamma.csv");
      write_matrix_csv(gamma_path, m.gamma, header);
      const auto obs_path = dir / (stem + "_observation.json");
      write_text(obs_path, elliptic::observation_to_json(p.obs));

      nlohmann::ordered_json j;
      j["config"] = config_json(config);
      j["N"] = n;
      j["sigma_eps"] = sigma;
      j["phi_map"] = m.phi_map;
      j["objective"] = p.map.objective;
      j["gradient_norm"] = p.map.gradient_norm;
      j["iterations"] = p.map.iterations;
      j["converged"] = p.map.converged;
      j["gamma_source"] = std::string(to_string(config.gamma));
      const auto summary_path = dir / (stem + ".json");
      write_text(summary_path, j.dump(2));
      m.files = {xi_path, gamma_path, obs_path, summary_path};
      outputs.push_back(std::move(m));
    }
  }
  return outputs;
}

std::string cmd_diagnose(const std::filesystem::path& trace_path) {
  const TraceTable table = read_trace_csv(trace_path);
  if (table.rows() == 0) throw std::invalid_argument(trace_path.string() + ": trace contains no samples");
  if (table.qoi_names.empty()) throw std::invalid_argument(trace_path.string() + ": trace has no QoI columns");

  nlohmann::ordered_json j;
  j["trace"] = trace_path.string();
  j["n"] = table.rows();
  double accepted = 0.0;
  for (int a : table.accepted) accepted += a;
  j["acceptance_rate"] = accepted / static_cast<double>(table.rows());
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (std::size_t q = 0; q < table.qoi_names.size(); ++q) {
    const auto& series = table.qoi[q];
    nlohmann::ordered_json entry;
    entry["qoi"] = table.qoi_names[q];
    entry["ims"] = nlohmann::ordered_json::parse(report_to_json(ess_ims(series), table.qoi_names[q]));
    const std::size_t batches = std::min<std::size_t>(100, series.size() / 10);
    entry["batch_means"] =
        nlohmann::ordered_json::parse(report_to_json(ess_batch_means(series, std::max<std::size_t>(batches, 2)),
                                                     table.qoi_names[q]));
    arr.push_back(std::move(entry));
  }
  j["qoi"] = std::move(arr);
  return j.dump(2);
}

std::string cmd_lab(std::uint64_t seed, std::size_t n_instances, std::size_t max_states) {
  lab::LabOptions opts;
  opts.seed = seed;
  opts.n_instances = n_instances;
  opts.max_states = max_states;
  opts.min_states = std::min<std::size_t>(opts.min_states, max_states);
  return lab::lab_report_to_json(lab::run_lab(opts));
}

}  // namespace gpcn
