#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gpcn/elliptic.hpp"

namespace gpcn {

enum class EssMethod { kInitialMonotoneSequence, kBatchMeans };
std::string_view to_string(EssMethod m);

struct DiagnosticsReport {
  std::vector<double> acf;  // normalised autocorrelation, acf[0] = 1
  double iact = 1.0;        // integrated autocorrelation time
  double ess = 0.0;         // n / iact, clipped to (0, n]
  EssMethod method = EssMethod::kInitialMonotoneSequence;
  std::size_t n = 0;
  std::size_t n0 = 0;
  std::size_t truncation_lag = 0;  // IMS: last lag included; batch means: batch size
};

/// Biased (1/n) sample autocorrelation for lags 0..max_lag. Throws on a
/// constant series or when max_lag is not in [1, n).
std::vector<double> autocorrelation(std::span<const double> series, std::size_t max_lag);

/// Default plotting lag: min(n / 50, 2000), at least 1.
std::size_t default_max_lag(std::size_t n);

/// Geyer's initial monotone sequence estimator. Pair sums
/// Gamma_m = rho(2m) + rho(2m + 1) are accumulated while positive and capped
/// by their running minimum; iact = -1 + 2 sum Gamma_m.
DiagnosticsReport ess_ims(std::span<const double> series, std::size_t max_acf_lag = 0);

/// Batch-means estimate with `n_batches` batches of equal size (>= 10). A
/// remainder that does not fill a batch is dropped from the start.
DiagnosticsReport ess_batch_means(std::span<const double> series, std::size_t n_batches = 100);

/// f(xi) = int_0^1 exp(u(x, xi)) dx by the trapezoidal rule.
double qoi_exp_integral(const Vector& xi, const elliptic::ForwardModel& model);

/// JSON object for one report; `label` identifies the QoI.
std::string report_to_json(const DiagnosticsReport& report, std::string_view label, bool include_acf = true);

}  // namespace gpcn
