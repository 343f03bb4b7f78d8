#include "gpcn/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>
#include <unsupported/Eigen/FFT>

namespace gpcn {

std::string_view to_string(EssMethod m) {
  switch (m) {
    case EssMethod::kInitialMonotoneSequence: return "initial-monotone-sequence";
    case EssMethod::kBatchMeans: return "batch-means";
  }
  return "unknown";
}

namespace {

void require_nonconstant(std::span<const double> series) {
  const auto [lo, hi] = std::minmax_element(series.begin(), series.end());
  if (*lo == *hi) throw std::invalid_argument("autocorrelation undefined for a constant series");
  for (double x : series) {
    if (!std::isfinite(x)) throw std::invalid_argument("series contains non-finite values");
  }
}

// Full biased autocorrelation for lags 0..n-1 via zero-padded FFT.
std::vector<double> full_acf(std::span<const double> series) {
  const std::size_t n = series.size();
  double mean = 0.0;
  for (double x : series) mean += x;
  mean /= static_cast<double>(n);

  std::size_t len = 1;
  while (len < 2 * n) len <<= 1;
  std::vector<double> padded(len, 0.0);
  for (std::size_t i = 0; i < n; ++i) padded[i] = series[i] - mean;

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spectrum;
  fft.fwd(spectrum, padded);
  for (auto& c : spectrum) c = std::complex<double>(std::norm(c), 0.0);
  std::vector<double> acov;
  fft.inv(acov, spectrum);

  std::vector<double> acf(n);
  const double c0 = acov[0];
  if (!(c0 > 0.0)) throw std::invalid_argument("autocorrelation undefined for a constant series");
  for (std::size_t k = 0; k < n; ++k) acf[k] = acov[k] / c0;
  acf[0] = 1.0;
  return acf;
}

void clip_ess(DiagnosticsReport& r, double raw_iact) {
  const double n = static_cast<double>(r.n);
  if (!(raw_iact > 1.0)) {
    r.ess = n;
  } else {
    r.ess = n / raw_iact;
  }
  r.iact = n / r.ess;
}

}  // namespace

std::size_t default_max_lag(std::size_t n) { return std::max<std::size_t>(1, std::min<std::size_t>(n / 50, 2000)); }

std::vector<double> autocorrelation(std::span<const double> series, std::size_t max_lag) {
  if (max_lag < 1 || max_lag >= series.size()) {
    std::ostringstream msg;
    msg << "autocorrelation: max_lag " << max_lag << " must lie in [1, " << series.size() << ")";
    throw std::invalid_argument(msg.str());
  }
  require_nonconstant(series);
  auto acf = full_acf(series);
  acf.resize(max_lag + 1);
  return acf;
}

DiagnosticsReport ess_ims(std::span<const double> series, std::size_t max_acf_lag) {
  if (series.size() < 100) throw std::invalid_argument("ess_ims: series must contain at least 100 values");
  require_nonconstant(series);
  const auto acf = full_acf(series);
  const std::size_t n = series.size();

  DiagnosticsReport r;
  r.method = EssMethod::kInitialMonotoneSequence;
  r.n = n;
  double sum = 0.0;
  double running_min = std::numeric_limits<double>::infinity();
  std::size_t last_lag = 0;
  for (std::size_t m = 0; 2 * m + 1 < n; ++m) {
    double pair = acf[2 * m] + acf[2 * m + 1];
    if (!(pair > 0.0)) break;
    pair = std::min(pair, running_min);
    running_min = pair;
    sum += pair;
    last_lag = 2 * m + 1;
  }
  r.truncation_lag = last_lag;
  clip_ess(r, -1.0 + 2.0 * sum);

  const std::size_t lag = max_acf_lag > 0 ? std::min(max_acf_lag, n - 1) : default_max_lag(n);
  r.acf.assign(acf.begin(), acf.begin() + static_cast<std::ptrdiff_t>(lag + 1));
  return r;
}

DiagnosticsReport ess_batch_means(std::span<const double> series, std::size_t n_batches) {
  if (n_batches < 2) throw std::invalid_argument("ess_batch_means: need at least 2 batches");
  const std::size_t batch = series.size() / n_batches;
  if (batch < 10) {
    std::ostringstream msg;
    msg << "ess_batch_means: series of length " << series.size() << " too short for " << n_batches
        << " batches of size >= 10";
    throw std::invalid_argument(msg.str());
  }
  const std::size_t used = batch * n_batches;
  const auto tail = series.subspan(series.size() - used);
  require_nonconstant(tail);

  double mean = 0.0;
  for (double x : tail) mean += x;
  mean /= static_cast<double>(used);
  double var = 0.0;
  for (double x : tail) var += (x - mean) * (x - mean);
  var /= static_cast<double>(used - 1);

  double var_bm = 0.0;
  for (std::size_t b = 0; b < n_batches; ++b) {
    double bm = 0.0;
    for (std::size_t i = 0; i < batch; ++i) bm += tail[b * batch + i];
    bm /= static_cast<double>(batch);
    var_bm += (bm - mean) * (bm - mean);
  }
  var_bm /= static_cast<double>(n_batches - 1);

  DiagnosticsReport r;
  r.method = EssMethod::kBatchMeans;
  r.n = used;
  r.truncation_lag = batch;
  clip_ess(r, static_cast<double>(batch) * var_bm / var);
  return r;
}

double qoi_exp_integral(const Vector& xi, const elliptic::ForwardModel& model) {
  return model.exp_integral_field(model.field(xi));
}

std::string report_to_json(const DiagnosticsReport& report, std::string_view label, bool include_acf) {
  nlohmann::ordered_json j;
  j["qoi"] = std::string(label);
  j["method"] = std::string(to_string(report.method));
  j["n"] = report.n;
  j["n0"] = report.n0;
  j["iact"] = report.iact;
  j["ess"] = report.ess;
  j["truncation_lag"] = report.truncation_lag;
  if (include_acf && !report.acf.empty()) j["acf"] = report.acf;
  return j.dump(2);
}

}  // namespace gpcn
