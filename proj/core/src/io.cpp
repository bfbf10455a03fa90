#include "sdeabc/io.hpp"

#include <charconv>
#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>
#include <system_error>

#include <nlohmann/json.hpp>

#include "sdeabc/errors.hpp"
#include "sdeabc/rng.hpp"

#ifndef SDEABC_VERSION
#define SDEABC_VERSION "unknown"
#endif

namespace sdeabc {

namespace fs = std::filesystem;

std::string software_version() { return SDEABC_VERSION; }

std::string format_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

namespace {

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  return out;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw DataError(path.string() + ": write failed");
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_real(const std::string& cell, const fs::path& path, std::size_t row,
                  const char* column) {
  double v = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  if (!cell.empty() && *begin == '+') ++begin;
  const auto res = std::from_chars(begin, end, v);
  if (cell.empty() || res.ec != std::errc() || res.ptr != end) {
    throw DataError(path.string() + ": row " + std::to_string(row) + ": column '" + column +
                    "' is not a number: '" + cell + "'");
  }
  return v;
}

}  // namespace

TimeSeries read_timeseries(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open for reading");
  std::string line;
  std::size_t row = 0;
  bool header_seen = false;
  std::vector<double> times;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++row;
    const std::string content = trim(line);
    if (content.empty()) continue;
    if (!header_seen) {
      if (content != "time,value") {
        throw DataError(path.string() + ": row " + std::to_string(row) +
                        ": expected header 'time,value', found '" + content + "'");
      }
      header_seen = true;
      continue;
    }
    const auto cells = split_csv(content);
    if (cells.size() != 2) {
      throw DataError(path.string() + ": row " + std::to_string(row) + ": expected 2 columns, found " +
                      std::to_string(cells.size()));
    }
    const double t = parse_real(cells[0], path, row, "time");
    const double v = parse_real(cells[1], path, row, "value");
    if (!std::isfinite(t) || !std::isfinite(v)) {
      throw DataError(path.string() + ": row " + std::to_string(row) + ": non-finite entry");
    }
    if (!times.empty() && !(t > times.back())) {
      throw DataError(path.string() + ": row " + std::to_string(row) +
                      ": time is not strictly increasing");
    }
    times.push_back(t);
    values.push_back(v);
  }
  if (!header_seen) throw DataError(path.string() + ": empty file, expected header 'time,value'");
  if (times.empty()) throw DataError(path.string() + ": no observations after the header");
  return TimeSeries(TimeGrid(std::move(times)), std::move(values));
}

void write_timeseries(const TimeSeries& series, const fs::path& path) {
  auto out = open_output(path);
  out << "time,value\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    out << format_real(series.times()[i]) << ',' << format_real(series.values()[i]) << '\n';
  }
  finish(out, path);
}

fs::path metadata_path(const fs::path& output) {
  fs::path p = output;
  p += ".meta.json";
  return p;
}

void write_metadata(const fs::path& output, const RunMetadata& meta) {
  nlohmann::ordered_json j;
  j["file"] = output.filename().string();
  j["software"] = "sdeabc";
  j["version"] = software_version();
  j["seed"] = meta.seed;
  j["config_digest"] = meta.config_digest;
  j["rng"] = std::string(RngStream::kAlgorithm);
  for (const auto& [k, v] : meta.extra) j["extra"][k] = v;
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  j["created_utc"] = stamp;
  const fs::path p = metadata_path(output);
  auto out = open_output(p);
  out << j.dump(2) << '\n';
  finish(out, p);
}

TimeSeries generate_dataset(const ModelParams& params, std::size_t n, double t_start,
                            double spacing, double x0, std::uint64_t seed, const fs::path& path,
                            const RunMetadata& meta) {
  if (n < 2) throw ConfigError("generate_dataset: n must be at least 2");
  if (!(spacing > 0.0)) throw ConfigError("generate_dataset: spacing must be positive");
  RngStream rng(seed, 0);
  const TimeGrid grid = TimeGrid::regular(t_start, spacing, n);
  TimeSeries z = simulate_observed(params, grid, x0, rng).z;
  write_timeseries(z, path);
  RunMetadata m = meta;
  m.seed = seed;
  for (std::size_t i = 0; i < kNumParams; ++i) {
    m.extra[std::string(kParamNames[i])] = format_real(params.log_values()[i]);
  }
  m.extra["x0"] = format_real(x0);
  m.extra["n"] = std::to_string(n);
  m.extra["t_start"] = format_real(t_start);
  m.extra["spacing"] = format_real(spacing);
  write_metadata(path, m);
  return z;
}

std::vector<std::string> chain_columns(ChainKind kind) {
  std::vector<std::string> cols{"iter"};
  for (auto name : kParamNames) cols.emplace_back(name);
  cols.emplace_back(kind == ChainKind::kAbc ? "delta" : "loglik_estimate");
  cols.emplace_back("accepted");
  cols.emplace_back("early_rejected");
  return cols;
}

void write_chain(const ChainTrace& chain, ChainKind kind, const fs::path& path,
                 std::uint64_t stride) {
  if (chain.empty()) throw DataError("write_chain: no records");
  if (chain.dimension() != kNumParams) throw DataError("write_chain: expected 8 parameters");
  if (stride == 0) stride = 1;
  auto out = open_output(path);
  const auto cols = chain_columns(kind);
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (std::size_t i = 0; i < chain.size(); i += stride) {
    const ChainRecord rec = chain[i];
    out << rec.iteration;
    for (double v : rec.log_eta) out << ',' << format_real(v);
    out << ',' << format_real(rec.aux) << ',' << (rec.accepted ? 1 : 0) << ','
        << (rec.early_rejected ? 1 : 0) << '\n';
  }
  finish(out, path);
}

ChainTrace read_chain(const fs::path& path, ChainKind* kind) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open for reading");
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty chain file");
  const auto header = split_csv(trim(line));
  ChainKind detected;
  if (header == chain_columns(ChainKind::kAbc)) {
    detected = ChainKind::kAbc;
  } else if (header == chain_columns(ChainKind::kPmmh)) {
    detected = ChainKind::kPmmh;
  } else {
    throw DataError(path.string() + ": row 1: unrecognized chain header");
  }
  if (kind) *kind = detected;
  ChainTrace chain(kNumParams);
  std::size_t row = 1;
  LogEta eta;
  while (std::getline(in, line)) {
    ++row;
    const std::string content = trim(line);
    if (content.empty()) continue;
    const auto cells = split_csv(content);
    if (cells.size() != header.size()) {
      throw DataError(path.string() + ": row " + std::to_string(row) + ": expected " +
                      std::to_string(header.size()) + " columns");
    }
    const auto iter = static_cast<std::uint64_t>(parse_real(cells[0], path, row, "iter"));
    for (std::size_t j = 0; j < kNumParams; ++j) {
      eta[j] = parse_real(cells[1 + j], path, row, header[1 + j].c_str());
    }
    const double aux = parse_real(cells[9], path, row, header[9].c_str());
    const bool accepted = parse_real(cells[10], path, row, "accepted") != 0.0;
    const bool early = parse_real(cells[11], path, row, "early_rejected") != 0.0;
    chain.push(iter, eta, aux, accepted, early);
  }
  if (chain.empty()) throw DataError(path.string() + ": no chain records");
  return chain;
}

void write_diagnostics(const std::vector<DeltaBin>& bins, const fs::path& path) {
  if (bins.empty()) throw DataError("write_diagnostics: no bins");
  auto out = open_output(path);
  out << "delta_center,delta_lower,delta_upper,count,accepted,early_rejected";
  for (auto name : kParamNames) out << ",mean_" << name << ",sd_" << name;
  out << '\n';
  for (const DeltaBin& b : bins) {
    out << format_real(b.center) << ',' << format_real(b.lower) << ',' << format_real(b.upper)
        << ',' << b.count << ',' << b.accepted << ',' << b.early_rejected;
    for (std::size_t j = 0; j < b.mean.size(); ++j) {
      out << ',' << format_real(b.mean[j]) << ',' << format_real(b.sd[j]);
    }
    out << '\n';
  }
  finish(out, path);
}

void write_posterior(const std::vector<PosteriorSummary>& summary, const fs::path& path) {
  auto out = open_output(path);
  out << "parameter,mean,q025,q975\n";
  for (std::size_t j = 0; j < summary.size(); ++j) {
    const std::string name = j < kNumParams ? std::string(kParamNames[j]) : "x" + std::to_string(j);
    out << name << ',' << format_real(summary[j].mean) << ',' << format_real(summary[j].lower)
        << ',' << format_real(summary[j].upper) << '\n';
  }
  finish(out, path);
}

void write_summary_vector(const SummaryVector& s, const SummarySpec& spec, const fs::path& path) {
  auto out = open_output(path);
  out << "statistic,value\n";
  std::size_t k = 0;
  for (std::size_t lag : spec.acf_lags_data()) {
    out << "acf_lag_" << lag << ',' << format_real(s.values[k++]) << '\n';
  }
  for (double p : spec.percentile_levels()) {
    out << "percentile_" << format_real(100.0 * p) << ',' << format_real(s.values[k++]) << '\n';
  }
  finish(out, path);
}

}  // namespace sdeabc
