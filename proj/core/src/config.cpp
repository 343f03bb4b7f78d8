#include "gpcn/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "gpcn/trace_io.hpp"

namespace gpcn {

std::string_view to_string(GammaSource g) {
  switch (g) {
    case GammaSource::kMap: return "map";
    case GammaSource::kZero: return "zero";
    case GammaSource::kAveraged: return "averaged";
  }
  return "unknown";
}

bool ExperimentConfig::has_format(const std::string& f) const {
  return std::find(formats.begin(), formats.end(), f) != formats.end();
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::istringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

template <class T>
std::string join(const std::vector<T>& items) {
  std::ostringstream ss;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) ss << ", ";
    if constexpr (std::is_same_v<T, double>) {
      ss << format_double(items[i]);
    } else {
      ss << items[i];
    }
  }
  return ss.str();
}

class Parser {
 public:
  explicit Parser(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(std::size_t line, const std::string& msg) const {
    std::ostringstream ss;
    ss << source_ << ":" << line << ": " << msg;
    throw ConfigError(ss.str());
  }

  double number(const std::string& key, const std::string& text, std::size_t line) const {
    try {
      std::size_t used = 0;
      const double v = std::stod(text, &used);
      if (used == text.size() && std::isfinite(v)) return v;
    } catch (const std::exception&) {
    }
    fail(line, key + ": expected a number, got '" + text + "'");
  }

  std::uint64_t integer(const std::string& key, const std::string& text, std::size_t line) const {
    if (text.empty() || !std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isdigit(c); })) {
      fail(line, key + ": expected a non-negative integer, got '" + text + "'");
    }
    try {
      return std::stoull(text);
    } catch (const std::exception&) {
      fail(line, key + ": integer out of range '" + text + "'");
    }
  }

  std::vector<std::string> list(const std::string& key, const std::string& text, std::size_t line) const {
    auto items = split_list(text);
    if (items.empty() || std::any_of(items.begin(), items.end(), [](const std::string& s) { return s.empty(); })) {
      fail(line, key + ": empty list element");
    }
    return items;
  }

 private:
  std::string source_;
};

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  Parser p(source);
  ExperimentConfig c;
  std::map<std::string, std::size_t> seen;

  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) p.fail(line_no, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) p.fail(line_no, "missing key");
    if (value.empty()) p.fail(line_no, key + ": missing value");
    if (auto it = seen.find(key); it != seen.end()) {
      p.fail(line_no, "duplicate key '" + key + "' (first set on line " + std::to_string(it->second) + ")");
    }
    seen[key] = line_no;

    const std::size_t L = line_no;
    if (key == "problem.N") {
      c.n_modes.clear();
      for (const auto& item : p.list(key, value, L)) {
        const auto v = p.integer(key, item, L);
        if (v < 1) p.fail(L, "problem.N: dimension must be positive");
        c.n_modes.push_back(static_cast<long>(v));
      }
    } else if (key == "problem.sigma_eps") {
      c.sigma_eps.clear();
      for (const auto& item : p.list(key, value, L)) {
        const double v = p.number(key, item, L);
        if (!(v > 0.0)) p.fail(L, "problem.sigma_eps: noise level must be positive");
        c.sigma_eps.push_back(v);
      }
    } else if (key == "problem.dx_exponent") {
      const auto v = p.integer(key, value, L);
      if (v < 2 || v > 20) p.fail(L, "problem.dx_exponent: must lie in [2, 20]");
      c.dx_exponent = static_cast<int>(v);
    } else if (key == "problem.truth") {
      if (value != "sine") p.fail(L, "problem.truth: only 'sine' is supported");
    } else if (key == "problem.truth_amplitude") {
      c.truth_amplitude = p.number(key, value, L);
    } else if (key == "problem.truth_frequency") {
      c.truth_frequency = p.number(key, value, L);
    } else if (key == "problem.data_seed") {
      c.data_seed = p.integer(key, value, L);
    } else if (key == "sampler.variant") {
      c.variants.clear();
      for (const auto& item : p.list(key, value, L)) {
        const auto v = parse_variant(item);
        if (!v) p.fail(L, "sampler.variant: unknown variant '" + item + "'");
        c.variants.push_back(*v);
      }
    } else if (key == "sampler.s") {
      const double v = p.number(key, value, L);
      if (!(v > 0.0)) p.fail(L, "sampler.s: step size must be positive");
      c.s = v;
    } else if (key == "sampler.target_acceptance") {
      const double v = p.number(key, value, L);
      if (!(v > 0.0 && v < 1.0)) p.fail(L, "sampler.target_acceptance: must lie in (0, 1)");
      c.target_acceptance = v;
    } else if (key == "sampler.pilot_n") {
      c.pilot_n = p.integer(key, value, L);
      if (c.pilot_n < 1000) p.fail(L, "sampler.pilot_n: must be at least 1000");
    } else if (key == "sampler.tune_tolerance") {
      c.tune_tolerance = p.number(key, value, L);
      if (!(c.tune_tolerance > 0.0 && c.tune_tolerance < 0.5)) p.fail(L, "sampler.tune_tolerance: must lie in (0, 0.5)");
    } else if (key == "sampler.gamma") {
      if (value == "map") c.gamma = GammaSource::kMap;
      else if (value == "zero") c.gamma = GammaSource::kZero;
      else if (value == "averaged") c.gamma = GammaSource::kAveraged;
      else p.fail(L, "sampler.gamma: expected map, zero or averaged");
    } else if (key == "sampler.gamma_points") {
      c.gamma_points = p.list(key, value, L);
      for (const auto& pt : c.gamma_points) {
        if (pt != "map" && pt != "zero" && pt != "prior") {
          p.fail(L, "sampler.gamma_points: unknown point '" + pt + "' (map, zero or prior)");
        }
      }
    } else if (key == "sampler.radius") {
      if (value == "none") {
        c.restriction_radius.reset();
      } else {
        const double v = p.number(key, value, L);
        if (!(v > 0.0)) p.fail(L, "sampler.radius: must be positive or 'none'");
        c.restriction_radius = v;
      }
    } else if (key == "run.n") {
      c.n = p.integer(key, value, L);
      if (c.n < 100) p.fail(L, "run.n: at least 100 retained steps are needed for diagnostics");
    } else if (key == "run.n0") {
      c.n0 = p.integer(key, value, L);
    } else if (key == "run.seed") {
      c.seeds.clear();
      for (const auto& item : p.list(key, value, L)) c.seeds.push_back(p.integer(key, item, L));
    } else if (key == "run.thin") {
      c.thin = p.integer(key, value, L);
      if (c.thin < 1) p.fail(L, "run.thin: must be at least 1");
    } else if (key == "run.initial") {
      if (value != "map" && value != "zero") p.fail(L, "run.initial: expected map or zero");
      c.initial = value;
    } else if (key == "output.dir") {
      c.out_dir = value;
    } else if (key == "output.formats") {
      c.formats = p.list(key, value, L);
      for (const auto& f : c.formats) {
        if (f != "csv" && f != "json" && f != "states") {
          p.fail(L, "output.formats: unknown format '" + f + "' (csv, json or states)");
        }
      }
    } else {
      p.fail(L, "unknown key '" + key + "'");
    }
  }

  if (c.s && seen.count("sampler.target_acceptance")) {
    p.fail(seen["sampler.target_acceptance"], "sampler.s and sampler.target_acceptance are mutually exclusive");
  }
  if (c.s && *c.s >= 1.0) {
    for (auto v : c.variants) {
      if (v != ProposalVariant::kRw && v != ProposalVariant::kGnRw) {
        p.fail(seen["sampler.s"], "sampler.s: must be < 1 for variant " + std::string(to_string(v)));
      }
    }
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open configuration file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

std::vector<std::string> resolved_lines(const ExperimentConfig& c) {
  std::vector<std::string> variants;
  for (auto v : c.variants) variants.emplace_back(to_string(v));
  std::vector<std::string> out = {
      "problem.N = " + join(c.n_modes),
      "problem.sigma_eps = " + join(c.sigma_eps),
      "problem.dx_exponent = " + std::to_string(c.dx_exponent),
      "problem.truth = sine",
      "problem.truth_amplitude = " + format_double(c.truth_amplitude),
      "problem.truth_frequency = " + format_double(c.truth_frequency),
      "problem.data_seed = " + std::to_string(c.data_seed),
      "sampler.variant = " + join(variants),
  };
  if (c.s) {
    out.push_back("sampler.s = " + format_double(*c.s));
  } else {
    out.push_back("sampler.target_acceptance = " + format_double(c.target_acceptance));
  }
  out.push_back("sampler.pilot_n = " + std::to_string(c.pilot_n));
  out.push_back("sampler.tune_tolerance = " + format_double(c.tune_tolerance));
  out.push_back("sampler.gamma = " + std::string(to_string(c.gamma)));
  out.push_back("sampler.gamma_points = " + join(c.gamma_points));
  out.push_back("sampler.radius = " + (c.restriction_radius ? format_double(*c.restriction_radius) : "none"));
  out.push_back("run.n = " + std::to_string(c.n));
  out.push_back("run.n0 = " + std::to_string(c.n0));
  out.push_back("run.seed = " + join(c.seeds));
  out.push_back("run.thin = " + std::to_string(c.thin));
  out.push_back("run.initial = " + c.initial);
  out.push_back("output.dir = " + c.out_dir);
  out.push_back("output.formats = " + join(c.formats));
  return out;
}

std::string to_text(const ExperimentConfig& config) {
  std::string text;
  for (const auto& line : resolved_lines(config)) text += line + "\n";
  return text;
}

}  // namespace gpcn
