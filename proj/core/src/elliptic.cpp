#include "gpcn/elliptic.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <json.hpp>

#include "gpcn/trace_io.hpp"

namespace gpcn::elliptic {

namespace {

// Weights c with S_{x_i}(f) = c . f for the cumulative trapezoid rule.
Vector cumulative_weights(Eigen::Index i, Eigen::Index nodes, double dx) {
  Vector c = Vector::Zero(nodes);
  if (i == 0) return c;
  c.segment(0, i + 1).setConstant(dx);
  c[0] = 0.5 * dx;
  c[i] = 0.5 * dx;
  return c;
}

}  // namespace

ForwardModel::ForwardModel(Eigen::Index n_modes, int dx_exponent, std::vector<double> obs_points)
    : dx_exponent_(dx_exponent), obs_points_(std::move(obs_points)) {
  if (n_modes <= 0) throw std::invalid_argument("ForwardModel: number of modes must be positive");
  if (dx_exponent < 1 || dx_exponent > 20) throw std::invalid_argument("ForwardModel: dx exponent out of range");
  if (obs_points_.empty()) throw std::invalid_argument("ForwardModel: no observation points");

  const Eigen::Index intervals = Eigen::Index{1} << dx_exponent;
  const Eigen::Index nodes = intervals + 1;
  dx_ = 1.0 / static_cast<double>(intervals);
  grid_.resize(nodes);
  for (Eigen::Index i = 0; i < nodes; ++i) grid_[i] = static_cast<double>(i) * dx_;

  const double scale = std::numbers::sqrt2 / std::numbers::pi;
  sine_.resize(nodes, n_modes);
  for (Eigen::Index k = 0; k < n_modes; ++k) {
    const double freq = static_cast<double>(k + 1) * std::numbers::pi;
    for (Eigen::Index i = 0; i < nodes; ++i) sine_(i, k) = scale * std::sin(freq * grid_[i]);
  }

  obs_weights_.resize(static_cast<Eigen::Index>(obs_points_.size()), nodes);
  for (std::size_t j = 0; j < obs_points_.size(); ++j) {
    const double x = obs_points_[j];
    if (!(x > 0.0 && x < 1.0)) throw std::invalid_argument("ForwardModel: observation points must lie in (0, 1)");
    const double pos = x / dx_;
    const auto i0 = static_cast<Eigen::Index>(std::floor(pos));
    const double t = pos - static_cast<double>(i0);
    Vector w = (1.0 - t) * cumulative_weights(i0, nodes, dx_);
    if (t > 0.0) w += t * cumulative_weights(i0 + 1, nodes, dx_);
    obs_weights_.row(static_cast<Eigen::Index>(j)) = w.transpose();
  }
  total_weights_ = cumulative_weights(nodes - 1, nodes, dx_);
}

Vector ForwardModel::field(const Vector& xi) const {
  if (xi.size() != n_modes()) {
    std::ostringstream msg;
    msg << "coefficient vector has dimension " << xi.size() << ", model expects " << n_modes();
    throw std::invalid_argument(msg.str());
  }
  return sine_ * xi;
}

Vector ForwardModel::observe_field(const Vector& u_nodes) const {
  const Vector w = (-u_nodes.array()).exp().matrix();
  const double total = total_weights_.dot(w);
  return (2.0 / total) * (obs_weights_ * w);
}

Vector ForwardModel::pressure_field(const Vector& u_nodes) const {
  const Vector w = (-u_nodes.array()).exp().matrix();
  Vector p(w.size());
  double acc = 0.0;
  p[0] = 0.0;
  for (Eigen::Index i = 1; i < w.size(); ++i) {
    acc += 0.5 * dx_ * (w[i - 1] + w[i]);
    p[i] = acc;
  }
  return (2.0 / acc) * p;
}

Vector ForwardModel::forward(const Vector& xi) const { return observe_field(field(xi)); }

Matrix ForwardModel::jacobian(const Vector& xi) const {
  const Vector w = (-field(xi).array()).exp().matrix();
  const double total = total_weights_.dot(w);
  const Vector partial = obs_weights_ * w;
  // d w_i / d xi_k = -w_i sine(i, k)
  const Matrix weighted = w.asDiagonal() * sine_;
  const Matrix d_partial = -(obs_weights_ * weighted);
  const Eigen::RowVectorXd d_total = -(total_weights_.transpose() * weighted);
  // p = 2 S_x / S_1  =>  dp = 2 (dS_x S_1 - S_x dS_1) / S_1^2
  Matrix jac = (2.0 / total) * d_partial;
  jac -= (2.0 / (total * total)) * partial * d_total;
  return jac;
}

double ForwardModel::exp_integral_field(const Vector& u_nodes) const {
  return total_weights_.dot(u_nodes.array().exp().matrix());
}

TruthSpec TruthSpec::sine(double amplitude, double frequency) {
  TruthSpec t;
  t.kind = Kind::kSine;
  t.amplitude = amplitude;
  t.frequency = frequency;
  return t;
}

TruthSpec TruthSpec::coeffs(Vector xi) {
  TruthSpec t;
  t.kind = Kind::kCoefficients;
  t.coefficients = std::move(xi);
  return t;
}

Vector TruthSpec::field(const ForwardModel& model) const {
  if (kind == Kind::kCoefficients) {
    if (coefficients.size() > model.n_modes()) {
      // Evaluate with a model wide enough for the truth's own expansion.
      ForwardModel wide(coefficients.size(), model.dx_exponent(), model.obs_points());
      return wide.field(coefficients);
    }
    Vector padded = Vector::Zero(model.n_modes());
    padded.head(coefficients.size()) = coefficients;
    return model.field(padded);
  }
  return (amplitude * (frequency * std::numbers::pi * model.grid().array()).sin()).matrix();
}

std::string TruthSpec::describe() const {
  std::ostringstream s;
  if (kind == Kind::kSine) {
    s << "u(x) = " << format_double(amplitude) << " * sin(" << format_double(frequency) << " * pi * x)";
  } else {
    s << "coefficients[" << coefficients.size() << "]";
  }
  return s.str();
}

Observation generate_data(const TruthSpec& truth, double sigma_eps, const ForwardModel& model,
                          std::uint64_t seed) {
  if (!(sigma_eps > 0.0)) throw std::invalid_argument("generate_data: sigma_eps must be positive");
  Observation obs;
  obs.sigma_eps = sigma_eps;
  obs.truth = truth;
  obs.seed = seed;
  obs.noise_free = model.observe_field(truth.field(model));
  Rng rng(seed);
  obs.y = obs.noise_free + sigma_eps * standard_normal(rng, obs.noise_free.size());
  return obs;
}

double phi(const Vector& xi, const Observation& obs, const ForwardModel& model) {
  const Vector r = obs.y - model.forward(xi);
  return 0.5 * r.squaredNorm() / (obs.sigma_eps * obs.sigma_eps);
}

std::string observation_to_json(const Observation& obs) {
  nlohmann::ordered_json j;
  j["y"] = std::vector<double>(obs.y.data(), obs.y.data() + obs.y.size());
  j["sigma_eps"] = obs.sigma_eps;
  nlohmann::ordered_json t;
  if (obs.truth.kind == TruthSpec::Kind::kSine) {
    t["kind"] = "sine";
    t["amplitude"] = obs.truth.amplitude;
    t["frequency"] = obs.truth.frequency;
  } else {
    t["kind"] = "coefficients";
    t["coefficients"] =
        std::vector<double>(obs.truth.coefficients.data(), obs.truth.coefficients.data() + obs.truth.coefficients.size());
  }
  t["description"] = obs.truth.describe();
  j["truth"] = t;
  j["seed"] = obs.seed;
  if (obs.noise_free.size() > 0) {
    j["noise_free"] = std::vector<double>(obs.noise_free.data(), obs.noise_free.data() + obs.noise_free.size());
  }
  return j.dump(2);
}

Observation observation_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  Observation obs;
  const auto y = j.at("y").get<std::vector<double>>();
  obs.y = Eigen::Map<const Vector>(y.data(), static_cast<Eigen::Index>(y.size()));
  obs.sigma_eps = j.at("sigma_eps").get<double>();
  if (!(obs.sigma_eps > 0.0)) throw std::invalid_argument("observation: sigma_eps must be positive");
  obs.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("truth")) {
    const auto& t = j["truth"];
    if (t.value("kind", std::string("sine")) == "sine") {
      obs.truth = TruthSpec::sine(t.value("amplitude", 2.0), t.value("frequency", 2.0));
    } else {
      const auto c = t.at("coefficients").get<std::vector<double>>();
      obs.truth = TruthSpec::coeffs(Eigen::Map<const Vector>(c.data(), static_cast<Eigen::Index>(c.size())));
    }
  }
  if (j.contains("noise_free")) {
    const auto g = j["noise_free"].get<std::vector<double>>();
    obs.noise_free = Eigen::Map<const Vector>(g.data(), static_cast<Eigen::Index>(g.size()));
  }
  return obs;
}

MapResult map_estimate(const ForwardFn& forward_fn, const JacobianFn& jacobian_fn, const Vector& y,
                       double sigma_eps, const PriorSpec& prior, const LmOptions& options) {
  if (!(sigma_eps > 0.0)) throw std::invalid_argument("map_estimate: sigma_eps must be positive");
  const Eigen::Index n = prior.dim();
  const double inv_s2 = 1.0 / (sigma_eps * sigma_eps);
  const Vector inv_c = prior.eigenvalues().cwiseInverse();

  auto objective = [&](const Vector& xi, Vector* misfit) {
    Vector r = y - forward_fn(xi);
    const double value = 0.5 * inv_s2 * r.squaredNorm() + 0.5 * xi.cwiseProduct(inv_c).dot(xi);
    if (misfit) *misfit = std::move(r);
    return value;
  };

  MapResult out;
  out.xi = Vector::Zero(n);
  Vector misfit;
  out.objective = objective(out.xi, &misfit);
  double damping = options.initial_damping;

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    const Matrix jac = jacobian_fn(out.xi);
    const Vector grad = -inv_s2 * (jac.transpose() * misfit) + inv_c.cwiseProduct(out.xi);
    out.gradient_norm = grad.norm();
    out.iterations = iter;
    if (out.gradient_norm < options.gradient_tol) {
      out.converged = true;
      return out;
    }
    Matrix normal = inv_s2 * (jac.transpose() * jac);
    normal.diagonal() += inv_c;

    bool improved = false;
    while (!improved) {
      Matrix damped = normal;
      damped.diagonal().array() += damping;
      const Vector step = damped.ldlt().solve(-grad);
      if (step.norm() < options.step_tol) {
        out.converged = true;
        return out;
      }
      const Vector candidate = out.xi + step;
      Vector cand_misfit;
      const double value = objective(candidate, &cand_misfit);
      if (std::isfinite(value) && value < out.objective) {
        out.xi = candidate;
        out.objective = value;
        misfit = std::move(cand_misfit);
        damping = std::max(damping / options.damping_decrease, 1e-15);
        improved = true;
      } else {
        damping *= options.damping_increase;
        if (damping > 1e20) {
          // No descent direction left at working precision.
          return out;
        }
      }
    }
  }
  const Matrix jac = jacobian_fn(out.xi);
  out.gradient_norm = (-inv_s2 * (jac.transpose() * misfit) + inv_c.cwiseProduct(out.xi)).norm();
  out.iterations = options.max_iterations;
  out.converged = out.gradient_norm < options.gradient_tol;
  return out;
}

MapResult map_estimate(const Observation& obs, const ForwardModel& model, const PriorSpec& prior,
                       const LmOptions& options) {
  if (prior.dim() != model.n_modes()) throw std::invalid_argument("map_estimate: prior and model dimensions differ");
  return map_estimate([&](const Vector& xi) { return model.forward(xi); },
                      [&](const Vector& xi) { return model.jacobian(xi); }, obs.y, obs.sigma_eps, prior,
                      options);
}

Matrix gamma_from_jacobian(const Matrix& jacobian, double sigma_eps) {
  if (!(sigma_eps > 0.0)) throw std::invalid_argument("gamma_from_jacobian: sigma_eps must be positive");
  const Matrix scaled = jacobian / sigma_eps;
  Matrix gamma = Matrix::Zero(jacobian.cols(), jacobian.cols());
  gamma.selfadjointView<Eigen::Lower>().rankUpdate(scaled.transpose());
  gamma.triangularView<Eigen::StrictlyUpper>() = gamma.transpose();
  return gamma;
}

Matrix build_gamma_from_map(const Vector& xi_map, const Observation& obs, const ForwardModel& model) {
  return gamma_from_jacobian(model.jacobian(xi_map), obs.sigma_eps);
}

LinearPosterior linear_posterior(const Matrix& L, const Vector& b, const Vector& y, const Matrix& sigma,
                                 const PriorSpec& prior) {
  const Eigen::Index m = L.rows();
  if (L.cols() != prior.dim() || b.size() != m || y.size() != m || sigma.rows() != m || sigma.cols() != m) {
    throw std::invalid_argument("linear_posterior: dimension mismatch");
  }
  const Matrix cl = prior.eigenvalues().asDiagonal() * L.transpose();  // C L^T
  Matrix s = L * cl + sigma;
  s = 0.5 * (s + s.transpose()).eval();
  Eigen::LLT<Matrix> llt(s);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("linear_posterior: L C L^T + Sigma is singular or indefinite");
  }
  LinearPosterior out;
  out.mean = cl * llt.solve(y - b);
  out.covariance = Matrix(prior.eigenvalues().asDiagonal()) - cl * llt.solve(cl.transpose());
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  return out;
}

}  // namespace gpcn::elliptic
