#include "sdeabc/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <openssl/evp.h>

#include "sdeabc/errors.hpp"

namespace sdeabc {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

std::string to_string(RunMode mode) {
  switch (mode) {
    case RunMode::kSimulate: return "simulate";
    case RunMode::kAbc: return "abc";
    case RunMode::kPmcmc: return "pmcmc";
    case RunMode::kFilter: return "filter";
    case RunMode::kSummarize: return "summarize";
  }
  return "unknown";
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256: digest failed");
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) {
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  }
  return os.str();
}

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = [] {
    std::set<std::string> k{
        "run.mode", "run.seed", "run.data", "run.output_dir", "run.progress_every",
        "model.preset", "model.x0",
        "grid.n", "grid.t_start", "grid.spacing",
        "summaries.acf_lags", "summaries.percentile_levels", "summaries.weights",
        "prior.preset", "prior.delta_rate",
        "abc.iterations", "abc.delta_start", "abc.delta_max", "abc.delta_minmax",
        "abc.update_period", "abc.update_percentile", "abc.logdelta_step_var", "abc.thin",
        "abc.burn_in", "abc.subsample_factor", "abc.delta_star", "abc.early_rejection",
        "abc.eta_start", "abc.start_pilot_draws",
        "adapt.initial_sd", "adapt.start", "adapt.epsilon", "adapt.scale", "adapt.enabled",
        "filter.particles", "filter.replicates", "filter.workers", "filter.x0_law",
        "filter.resampling",
        "pmcmc.iterations", "pmcmc.burn_in", "pmcmc.thin", "pmcmc.ignore_data", "pmcmc.eta_start",
        "output.chain_stride", "output.diagnostic_bins",
        "summarize.chain", "summarize.burn_in", "summarize.thin", "summarize.delta_star"};
    for (auto name : kParamNames) {
      k.insert("model." + std::string(name));
      k.insert("prior." + std::string(name));
    }
    return k;
  }();
  return keys;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

// Typed access to the flattened key/value map, collecting every problem.
class Fields {
 public:
  Fields(std::map<std::string, std::string> values, std::vector<std::string>& errors)
      : values_(std::move(values)), errors_(errors) {}

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string text(const std::string& key, const std::string& fallback = {}) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double real(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    double v = 0.0;
    if (!parse_real(text(key), v)) {
      errors_.push_back(key + ": not a number: '" + text(key) + "'");
      return fallback;
    }
    return v;
  }

  std::uint64_t count(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const std::string s = text(key);
    std::uint64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
      // Accept integral reals such as 4e5.
      double d = 0.0;
      if (parse_real(s, d) && d >= 0.0 && d == std::floor(d) && d < 1.8e19) {
        return static_cast<std::uint64_t>(d);
      }
      errors_.push_back(key + ": not a non-negative integer: '" + s + "'");
      return fallback;
    }
    return v;
  }

  bool flag(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    std::string s = text(key);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    errors_.push_back(key + ": not a boolean: '" + text(key) + "'");
    return fallback;
  }

  std::vector<double> reals(const std::string& key) {
    std::vector<double> out;
    if (!has(key)) return out;
    std::istringstream is(text(key));
    std::string cell;
    while (std::getline(is, cell, ',')) {
      double v = 0.0;
      if (!parse_real(trim(cell), v)) {
        errors_.push_back(key + ": not a list of numbers: '" + text(key) + "'");
        return {};
      }
      out.push_back(v);
    }
    return out;
  }

  std::vector<std::size_t> counts(const std::string& key) {
    std::vector<std::size_t> out;
    for (double v : reals(key)) {
      if (!(v >= 1.0 && v == std::floor(v))) {
        errors_.push_back(key + ": entries must be positive integers");
        return {};
      }
      out.push_back(static_cast<std::size_t>(v));
    }
    return out;
  }

  void error(const std::string& msg) { errors_.push_back(msg); }

 private:
  static bool parse_real(const std::string& s, double& v) {
    const char* begin = s.data();
    const char* end = begin + s.size();
    if (begin != end && *begin == '+') ++begin;
    const auto res = std::from_chars(begin, end, v);
    return !s.empty() && res.ec == std::errc() && res.ptr == end && std::isfinite(v);
  }

  std::map<std::string, std::string> values_;
  std::vector<std::string>& errors_;
};

std::map<std::string, std::string> flatten(const pt::ptree& tree, std::vector<std::string>& errors) {
  std::map<std::string, std::string> out;
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      errors.push_back(section + ": key outside of any [section]");
      continue;
    }
    for (const auto& [key, value] : body) out[section + "." + key] = trim(value.data());
  }
  return out;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

std::optional<RunMode> parse_mode(const std::string& s) {
  if (s == "simulate") return RunMode::kSimulate;
  if (s == "abc") return RunMode::kAbc;
  if (s == "pmcmc") return RunMode::kPmcmc;
  if (s == "filter") return RunMode::kFilter;
  if (s == "summarize") return RunMode::kSummarize;
  return std::nullopt;
}

// AbcConfig reports bare field names; qualify them with their config section.
std::string qualify_abc_error(const std::string& msg) {
  const auto colon = msg.find(": ");
  if (colon == std::string::npos) return "abc: " + msg;
  std::istringstream is(msg.substr(0, colon));
  std::string key;
  std::string keys;
  while (std::getline(is, key, ',')) {
    key = trim(key);
    if (!keys.empty()) keys += ", ";
    keys += key.rfind("adapt.", 0) == 0 ? key : "abc." + key;
  }
  return keys + msg.substr(colon);
}

std::optional<std::vector<double>> eta_vector(Fields& f, const std::string& key) {
  if (!f.has(key)) return std::nullopt;
  auto v = f.reals(key);
  if (v.size() != kNumParams) {
    f.error(key + ": expected " + std::to_string(kNumParams) + " values");
    return std::nullopt;
  }
  return v;
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides,
                       const fs::path& base_dir) {
  std::vector<std::string> errors;
  pt::ptree tree;
  try {
    std::istringstream is(text);
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config: line " + std::to_string(e.line()) + ": " + e.message());
  }
  auto values = flatten(tree, errors);
  for (const std::string& o : overrides) {
    const auto eq = o.find('=');
    const std::string key = trim(o.substr(0, eq));
    if (eq == std::string::npos || key.find('.') == std::string::npos) {
      errors.push_back("override '" + o + "': expected section.key=value");
      continue;
    }
    values[key] = trim(o.substr(eq + 1));
  }
  for (const auto& [key, value] : values) {
    if (!known_keys().count(key)) errors.push_back(key + ": unknown key");
  }

  std::string canonical;
  for (const auto& [key, value] : values) canonical += key + "=" + value + "\n";

  Fields f(values, errors);
  RunConfig cfg;
  cfg.digest = sha256_hex(canonical);

  // [run]
  std::optional<RunMode> mode;
  if (!f.has("run.mode")) {
    errors.push_back("run.mode: required (simulate, abc, pmcmc, filter or summarize)");
  } else if (!(mode = parse_mode(f.text("run.mode")))) {
    errors.push_back("run.mode: unknown mode '" + f.text("run.mode") +
                     "' (expected simulate, abc, pmcmc, filter or summarize)");
  }
  if (mode) cfg.mode = *mode;
  if (!f.has("run.seed")) errors.push_back("run.seed: required");
  cfg.seed = f.count("run.seed", 0);
  cfg.progress_every = f.count("run.progress_every", 0);
  const std::string out_dir = f.text("run.output_dir", ".");
  if (out_dir.empty()) errors.push_back("run.output_dir: must not be empty");
  cfg.output_dir = resolve(base_dir, out_dir);
  const bool needs_data = mode && (*mode == RunMode::kAbc || *mode == RunMode::kPmcmc ||
                                   *mode == RunMode::kFilter);
  if (f.has("run.data")) {
    if (f.text("run.data").empty()) errors.push_back("run.data: must not be empty");
    cfg.data = resolve(base_dir, f.text("run.data"));
  } else if (needs_data) {
    errors.push_back("run.data: required in " + to_string(*mode) + " mode");
  }

  // [model]
  const bool needs_model = mode && (*mode == RunMode::kSimulate || *mode == RunMode::kFilter);
  cfg.x0 = f.real("model.x0", 0.0);
  {
    LogEta eta{};
    bool any = false;
    bool complete = true;
    const std::string preset = f.text("model.preset", "none");
    if (preset == "simulation_study") {
      eta = ModelParams::simulation_study_truth().log_values();
      any = true;
    } else if (preset != "none") {
      errors.push_back("model.preset: unknown preset '" + preset + "'");
    }
    for (std::size_t i = 0; i < kNumParams; ++i) {
      const std::string key = "model." + std::string(kParamNames[i]);
      if (f.has(key)) {
        eta[i] = f.real(key, 0.0);
        any = true;
      } else if (preset != "simulation_study") {
        complete = false;
        if (needs_model) errors.push_back(key + ": required in " + to_string(*mode) + " mode");
      }
    }
    if (any && complete) {
      try {
        cfg.model.emplace(eta);
      } catch (const std::exception& e) {
        errors.push_back(std::string("model: ") + e.what());
      }
    } else if (any && !needs_model) {
      errors.push_back("model: incomplete parameter set");
    }
  }

  // [grid]
  if (mode == RunMode::kSimulate) {
    if (!f.has("grid.n")) errors.push_back("grid.n: required in simulate mode");
    cfg.grid.n = f.count("grid.n", 0);
    cfg.grid.t_start = f.real("grid.t_start", 1.0);
    cfg.grid.spacing = f.real("grid.spacing", 1.0);
    if (f.has("grid.n") && cfg.grid.n < 2) errors.push_back("grid.n: must be at least 2");
    if (!(cfg.grid.spacing > 0.0)) errors.push_back("grid.spacing: must be positive");
  }

  // [abc] read first: the subsampling factor shapes the summary spec.
  AbcConfig& abc = cfg.abc;
  abc.iterations = f.count("abc.iterations", 0);
  abc.delta_start = f.real("abc.delta_start", abc.delta_start);
  abc.delta_max = f.real("abc.delta_max", abc.delta_max);
  abc.delta_minmax = f.real("abc.delta_minmax", abc.delta_minmax);
  abc.update_period = f.count("abc.update_period", abc.update_period);
  abc.update_percentile = f.real("abc.update_percentile", abc.update_percentile);
  abc.logdelta_step_var = f.real("abc.logdelta_step_var", abc.logdelta_step_var);
  abc.thin = f.count("abc.thin", abc.thin);
  abc.burn_in = f.count("abc.burn_in", 0);
  abc.subsample_factor = f.count("abc.subsample_factor", 1);
  abc.early_rejection = f.flag("abc.early_rejection", true);
  abc.x0 = cfg.x0;
  abc.eta_start = eta_vector(f, "abc.eta_start");
  abc.start_pilot_draws = f.count("abc.start_pilot_draws", abc.start_pilot_draws);
  abc.progress_every = cfg.progress_every;
  cfg.delta_star = f.real("abc.delta_star", 0.0);

  // [adapt] shared by abc and pmcmc
  AdaptSettings adapt;
  if (f.has("adapt.initial_sd")) {
    adapt.initial_sd = f.reals("adapt.initial_sd");
    if (adapt.initial_sd.size() != kNumParams) {
      errors.push_back("adapt.initial_sd: expected " + std::to_string(kNumParams) + " values");
    }
  }
  adapt.start = f.count("adapt.start", adapt.start);
  adapt.epsilon = f.real("adapt.epsilon", adapt.epsilon);
  adapt.scale = f.real("adapt.scale", adapt.scale);
  adapt.enabled = f.flag("adapt.enabled", true);
  abc.adapt = adapt;

  // [output]
  cfg.chain_stride = f.count("output.chain_stride", 1);
  cfg.diagnostic_bins = f.count("output.diagnostic_bins", 20);
  if (cfg.chain_stride == 0) errors.push_back("output.chain_stride: must be positive");
  if (cfg.diagnostic_bins == 0) errors.push_back("output.diagnostic_bins: must be positive");

  // [summaries]
  const bool needs_summaries = mode == RunMode::kAbc;
  if (f.has("summaries.acf_lags") || f.has("summaries.percentile_levels") ||
      f.has("summaries.weights")) {
    const auto lags = f.counts("summaries.acf_lags");
    const auto levels = f.reals("summaries.percentile_levels");
    const auto weights = f.reals("summaries.weights");
    try {
      cfg.summaries = SummarySpec::with_subsampling(lags, std::max<std::size_t>(abc.subsample_factor, 1),
                                                    levels, weights);
    } catch (const std::exception& e) {
      errors.push_back(std::string("summaries: ") + e.what());
    }
  } else if (needs_summaries) {
    errors.push_back("summaries.acf_lags, summaries.percentile_levels, summaries.weights: "
                     "required in abc mode");
  }

  // [prior]
  {
    const std::string preset = f.text("prior.preset", "simulation_study");
    if (preset == "simulation_study") {
      cfg.prior = PriorSpec::simulation_study();
    } else if (preset == "none") {
      cfg.prior.eta.lo.assign(kNumParams, 0.0);
      cfg.prior.eta.hi.assign(kNumParams, 0.0);
    } else {
      errors.push_back("prior.preset: unknown preset '" + preset + "'");
      cfg.prior = PriorSpec::simulation_study();
    }
    for (std::size_t i = 0; i < kNumParams; ++i) {
      const std::string key = "prior." + std::string(kParamNames[i]);
      if (!f.has(key)) continue;
      const auto bounds = f.reals(key);
      if (bounds.size() != 2) {
        errors.push_back(key + ": expected 'lower, upper'");
        continue;
      }
      cfg.prior.eta.lo[i] = bounds[0];
      cfg.prior.eta.hi[i] = bounds[1];
    }
    cfg.prior.delta_rate = f.real("prior.delta_rate", cfg.prior.delta_rate);
    if (mode == RunMode::kAbc || mode == RunMode::kPmcmc) {
      std::vector<std::string> prior_errors;
      cfg.prior.eta.validate(prior_errors);
      for (auto& e : prior_errors) errors.push_back(e);
      if (!(cfg.prior.delta_rate > 0.0)) errors.push_back("prior.delta_rate: must be positive");
    }
  }

  if (mode == RunMode::kAbc) {
    for (const auto& e : abc.validate()) errors.push_back(qualify_abc_error(e));
    if (!(cfg.delta_star > 0.0)) errors.push_back("abc.delta_star: required, must be positive");
    if (abc.eta_start && !cfg.prior.eta.contains(*abc.eta_start)) {
      errors.push_back("abc.eta_start: outside the prior box");
    }
  }

  // [filter] used by filter and pmcmc modes
  FilterSettings& fs_ = cfg.pmmh_settings.filter;
  fs_.particles = f.count("filter.particles", 100);
  fs_.x0 = cfg.x0;
  cfg.pmmh_settings.replicates = f.count("filter.replicates", 1);
  cfg.pmmh_settings.workers =
      f.has("filter.workers") ? f.count("filter.workers", 1)
                              : default_worker_count(std::max<std::size_t>(cfg.pmmh_settings.replicates, 1));
  {
    const std::string law = f.text("filter.x0_law", "fixed");
    if (law == "fixed") {
      fs_.x0_law = InitialLaw::kFixed;
    } else if (law == "stationary") {
      fs_.x0_law = InitialLaw::kStationary;
    } else {
      errors.push_back("filter.x0_law: expected fixed or stationary, got '" + law + "'");
    }
    const std::string rs = f.text("filter.resampling", "multinomial");
    if (rs == "multinomial") {
      fs_.resampling = Resampling::kMultinomial;
    } else if (rs == "systematic") {
      fs_.resampling = Resampling::kSystematic;
    } else {
      errors.push_back("filter.resampling: expected multinomial or systematic, got '" + rs + "'");
    }
  }
  if (mode == RunMode::kFilter || mode == RunMode::kPmcmc) {
    if (fs_.particles == 0) errors.push_back("filter.particles: must be positive");
    if (cfg.pmmh_settings.replicates == 0) errors.push_back("filter.replicates: must be positive");
    if (cfg.pmmh_settings.workers == 0) errors.push_back("filter.workers: must be positive");
  }

  // [pmcmc]
  cfg.pmmh.iterations = f.count("pmcmc.iterations", 0);
  cfg.pmmh.adapt = adapt;
  cfg.pmmh.eta_start = eta_vector(f, "pmcmc.eta_start");
  cfg.pmmh.progress_every = cfg.progress_every;
  cfg.pmmh_burn_in = f.count("pmcmc.burn_in", 0);
  cfg.pmmh_thin = f.count("pmcmc.thin", 1);
  cfg.pmmh_settings.ignore_data = f.flag("pmcmc.ignore_data", false);
  if (mode == RunMode::kPmcmc) {
    if (cfg.pmmh.iterations == 0) errors.push_back("pmcmc.iterations: must be positive");
    if (cfg.pmmh_thin == 0) errors.push_back("pmcmc.thin: must be positive");
    if (cfg.pmmh_burn_in >= cfg.pmmh.iterations && cfg.pmmh.iterations > 0) {
      errors.push_back("pmcmc.burn_in, pmcmc.iterations: burn_in must be smaller than iterations");
    }
    if (cfg.pmmh.eta_start && !cfg.prior.eta.contains(*cfg.pmmh.eta_start)) {
      errors.push_back("pmcmc.eta_start: outside the prior box");
    }
    if (!adapt.initial_sd.empty()) {
      for (double sd : adapt.initial_sd) {
        if (!(sd > 0.0)) {
          errors.push_back("adapt.initial_sd: entries must be positive");
          break;
        }
      }
    }
  }

  // [summarize]
  if (mode == RunMode::kSummarize) {
    if (!f.has("summarize.chain") || f.text("summarize.chain").empty()) {
      errors.push_back("summarize.chain: required in summarize mode");
    } else {
      cfg.summarize.chain = resolve(base_dir, f.text("summarize.chain"));
    }
    cfg.summarize.burn_in = f.count("summarize.burn_in", 0);
    cfg.summarize.thin = f.count("summarize.thin", 1);
    cfg.summarize.delta_star = f.real("summarize.delta_star", 0.0);
    if (cfg.summarize.thin == 0) errors.push_back("summarize.thin: must be positive");
    if (f.has("summarize.delta_star") && !(cfg.summarize.delta_star > 0.0)) {
      errors.push_back("summarize.delta_star: must be positive");
    }
  }

  if (!errors.empty()) {
    std::string msg = "invalid configuration (" + std::to_string(errors.size()) + " problem" +
                      (errors.size() == 1 ? "" : "s") + "):";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  return cfg;
}

RunConfig load_config(const fs::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  std::ostringstream os;
  os << in.rdbuf();
  try {
    return parse_config(os.str(), overrides, path.parent_path());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace sdeabc
