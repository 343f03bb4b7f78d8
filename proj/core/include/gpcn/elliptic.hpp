#pragma once

// One-dimensional elliptic inverse problem: infer the log-permeability u of
//   (e^{u(x)} p'(x))' = 0 on [0, 1],  p(0) = 0, p(1) = 2,
// from noisy point values of p. The log-permeability is represented by the
// truncated sine expansion u(x) = sqrt(2)/pi * sum_k xi_k sin(k pi x) and the
// solution is evaluated through p(x) = 2 S_x(e^{-u}) / S_1(e^{-u}),
// S_x(f) = int_0^x f, with trapezoidal quadrature on a uniform grid.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gpcn/gaussian_ops.hpp"

namespace gpcn::elliptic {

class ForwardModel {
 public:
  /// Grid spacing 2^-dx_exponent on [0, 1]; observation points 0.2 j, j = 1..4.
  explicit ForwardModel(Eigen::Index n_modes, int dx_exponent = 9,
                        std::vector<double> obs_points = {0.2, 0.4, 0.6, 0.8});

  Eigen::Index n_modes() const { return sine_.cols(); }
  Eigen::Index n_nodes() const { return grid_.size(); }
  Eigen::Index n_obs() const { return obs_weights_.rows(); }
  double dx() const { return dx_; }
  int dx_exponent() const { return dx_exponent_; }
  const Vector& grid() const { return grid_; }
  const std::vector<double>& obs_points() const { return obs_points_; }
  /// sine(i, k) = sqrt(2)/pi * sin((k+1) pi x_i).
  const Matrix& sine_table() const { return sine_; }

  /// Nodal values of u for coefficient vector xi.
  Vector field(const Vector& xi) const;
  /// Pressure at the observation points for a nodal log-permeability field.
  Vector observe_field(const Vector& u_nodes) const;
  /// Pressure at every grid node for a nodal field.
  Vector pressure_field(const Vector& u_nodes) const;
  /// G(xi), linear interpolation of p at the observation points.
  Vector forward(const Vector& xi) const;
  /// n_obs x N Jacobian of forward.
  Matrix jacobian(const Vector& xi) const;
  /// Trapezoidal integral of e^{u} on the grid.
  double exp_integral_field(const Vector& u_nodes) const;

 private:
  int dx_exponent_;
  double dx_;
  Vector grid_;
  std::vector<double> obs_points_;
  Matrix sine_;
  Matrix obs_weights_;   // n_obs x nodes: interpolated cumulative trapezoid weights
  Vector total_weights_; // nodes: trapezoid weights over [0, 1]
};

/// sqrt(2)/pi * sum_k xi_k sin(k pi x) on the grid.
inline Vector kl_to_field(const Vector& xi, const ForwardModel& model) { return model.field(xi); }
inline Vector forward(const Vector& xi, const ForwardModel& model) { return model.forward(xi); }
inline Matrix jacobian(const Vector& xi, const ForwardModel& model) { return model.jacobian(xi); }

/// Source of synthetic data: either a sine field amplitude * sin(frequency pi x)
/// or a coefficient vector in the model's expansion.
struct TruthSpec {
  enum class Kind { kSine, kCoefficients } kind = Kind::kSine;
  double amplitude = 2.0;
  double frequency = 2.0;  // multiples of pi: u(x) = amplitude * sin(frequency * pi * x)
  Vector coefficients;

  /// Default truth u(x) = 2 sin(2 pi x).
  static TruthSpec sine(double amplitude = 2.0, double frequency = 2.0);
  static TruthSpec coeffs(Vector xi);
  Vector field(const ForwardModel& model) const;
  std::string describe() const;
};

struct Observation {
  Vector y;
  double sigma_eps = 0.1;
  TruthSpec truth;
  std::uint64_t seed = 0;
  Vector noise_free;
};

/// y = G_truth + sigma_eps * z.
Observation generate_data(const TruthSpec& truth, double sigma_eps, const ForwardModel& model,
                          std::uint64_t seed);

/// Phi(xi) = |y - G(xi)|^2 / (2 sigma^2).
double phi(const Vector& xi, const Observation& obs, const ForwardModel& model);

/// Observation JSON: {"y": [...], "sigma_eps": s, "truth": {...}, "seed": n}.
std::string observation_to_json(const Observation& obs);
Observation observation_from_json(const std::string& text);

using ForwardFn = std::function<Vector(const Vector&)>;
using JacobianFn = std::function<Matrix(const Vector&)>;

struct LmOptions {
  double initial_damping = 1e-3;
  double damping_increase = 10.0;
  double damping_decrease = 10.0;
  double gradient_tol = 1e-8;
  double step_tol = 1e-12;
  int max_iterations = 500;
};

struct MapResult {
  Vector xi;
  double objective = 0.0;  // 1/2 |r|^2 = Phi(xi) + 1/2 ||C^{-1/2} xi||^2
  double gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Levenberg-Marquardt on r(xi) = [(y - G(xi)) / sigma; C^{-1/2} xi], started
/// at xi = 0.
MapResult map_estimate(const ForwardFn& forward_fn, const JacobianFn& jacobian_fn, const Vector& y,
                       double sigma_eps, const PriorSpec& prior, const LmOptions& options = {});
MapResult map_estimate(const Observation& obs, const ForwardModel& model, const PriorSpec& prior,
                       const LmOptions& options = {});

/// Gamma = J^T J / sigma^2 with J = grad G(xi).
Matrix build_gamma_from_map(const Vector& xi_map, const Observation& obs, const ForwardModel& model);
/// Gamma from an explicit Jacobian.
Matrix gamma_from_jacobian(const Matrix& jacobian, double sigma_eps);

struct LinearPosterior {
  Vector mean;
  Matrix covariance;
};

/// Exact posterior for y = L xi + b + noise, noise ~ N(0, Sigma), prior N(0, C):
/// m = C L^T (L C L^T + Sigma)^{-1} (y - b), C_hat = C - C L^T (L C L^T + Sigma)^{-1} L C.
LinearPosterior linear_posterior(const Matrix& L, const Vector& b, const Vector& y, const Matrix& sigma,
                                 const PriorSpec& prior);

}  // namespace gpcn::elliptic
