#pragma once

// Experiment configuration: flat "key = value" text with dotted section
// prefixes, '#' comments and comma-separated lists. Unknown keys, duplicate
// keys and invalid values are reported with the offending line number.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gpcn/proposals.hpp"

namespace gpcn {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class GammaSource { kMap, kZero, kAveraged };
std::string_view to_string(GammaSource g);

struct ExperimentConfig {
  // problem
  std::vector<long> n_modes{100};
  std::vector<double> sigma_eps{0.1};
  int dx_exponent = 9;
  double truth_amplitude = 2.0;
  double truth_frequency = 2.0;
  std::uint64_t data_seed = 1;
  // sampler
  std::vector<ProposalVariant> variants{ProposalVariant::kGpcn};
  std::optional<double> s;  // fixed step size; otherwise tuned
  double target_acceptance = 0.25;
  std::size_t pilot_n = 2000;
  double tune_tolerance = 0.05;
  GammaSource gamma = GammaSource::kMap;
  std::vector<std::string> gamma_points{"map", "zero"};  // for kAveraged: map | zero | prior
  std::optional<double> restriction_radius;
  // run
  std::size_t n = 10000;
  std::size_t n0 = 1000;
  std::vector<std::uint64_t> seeds{1};
  std::size_t thin = 1;
  std::string initial = "map";  // map | zero
  // output
  std::string out_dir = "out";
  std::vector<std::string> formats{"csv", "json"};  // csv | json | states

  bool has_format(const std::string& f) const;
};

/// Parses configuration text; `source` names the input in error messages.
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path);

/// Every key with its resolved value, in canonical order ("key = value").
/// Parsing the joined lines reproduces the configuration.
std::vector<std::string> resolved_lines(const ExperimentConfig& config);
std::string to_text(const ExperimentConfig& config);

}  // namespace gpcn
