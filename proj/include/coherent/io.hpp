#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ios>
#include <limits>
#include <locale>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "coherent/band.hpp"
#include "coherent/datasets.hpp"
#include "coherent/errors.hpp"
#include "coherent/rng.hpp"
#include "coherent/sample.hpp"
#include "coherent/grid.hpp"
#include "coherent/verify.hpp"

namespace coherent::io {

inline constexpr int kSchemaVersion = 1;

class io_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

inline bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace detail

/// Single-column numeric text. Lines starting with '#' and blank lines are
/// skipped; the first remaining line may be a non-numeric header.
inline ObservedSample parse_sample(std::istream& in) {
  std::vector<double> values;
  std::string line;
  std::size_t lineno = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    const auto field = detail::trim(line);
    if (field.empty() || field.front() == '#') continue;
    double v = 0.0;
    if (!detail::parse_double(field, v)) {
      if (first) {
        first = false;
        continue;
      }
      throw parse_error("non-numeric value '" + std::string(field) + "'", lineno);
    }
    first = false;
    if (!std::isfinite(v)) throw parse_error("non-finite value", lineno);
    values.push_back(v);
  }
  if (values.empty()) throw parse_error("no numeric values", lineno);
  return ObservedSample(std::move(values));
}

inline ObservedSample read_sample(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path.string());
  return parse_sample(in);
}

/// Equal-weight mixture of N(2, 4) and N(10, 1); deterministic in seed.
inline ObservedSample synth_two_gaussians(std::size_t n, std::uint64_t seed) {
  if (n < 1) throw config_error("synthetic sample needs n >= 1");
  Rng rng = path_stream(seed, 0);
  std::vector<double> v(n);
  for (auto& y : v) {
    const bool first = uniform01(rng) < 0.5;
    y = first ? 2.0 + 2.0 * standard_normal(rng) : 10.0 + standard_normal(rng);
  }
  return ObservedSample(std::move(v));
}

inline constexpr std::size_t kBuiltinTwoGaussiansSize = 50;
inline constexpr std::uint64_t kBuiltinTwoGaussiansSeed = 1;

inline ObservedSample builtin_sample(const std::string& name) {
  if (name == "galaxy")
    return ObservedSample(std::vector<double>(datasets::galaxy.begin(), datasets::galaxy.end()));
  if (name == "two-gaussians")
    return synth_two_gaussians(kBuiltinTwoGaussiansSize, kBuiltinTwoGaussiansSeed);
  throw config_error("unknown builtin dataset '" + name + "'");
}

// ---------------------------------------------------------------------------
// Output. CSV: comma separated, '.' decimal, LF endings, '#' metadata line.
// ---------------------------------------------------------------------------

using Json = nlohmann::ordered_json;

inline std::ostream& full_precision(std::ostream& os) {
  os.imbue(std::locale::classic());
  return os << std::setprecision(17);
}

inline void write_metadata(std::ostream& os, const Json& metadata) {
  os << "# " << metadata.dump() << '\n';
}

class OutputFile {
public:
  explicit OutputFile(const std::filesystem::path& path) : path_(path) {
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) throw io_error("cannot write " + path.string());
    full_precision(out_);
  }

  std::ostream& stream() { return out_; }

  void close() {
    out_.close();
    if (!out_) throw io_error("failed writing " + path_.string());
  }

private:
  std::filesystem::path path_;
  std::ofstream out_;
};

inline void write_sample_csv(std::ostream& os, const ObservedSample& sample, const Json& metadata) {
  write_metadata(os, metadata);
  os << "y\n";
  for (double v : sample.values()) os << v << '\n';
}

inline void write_band_csv(std::ostream& os, const CredibleBand& band, const Json& metadata) {
  write_metadata(os, metadata);
  os << "y,lower,mean,upper\n";
  for (std::size_t i = 0; i < band.grid.size(); ++i)
    os << band.grid[i] << ',' << band.lower[i] << ',' << band.mean[i] << ',' << band.upper[i] << '\n';
}

/// One column per path, starting at `first` and holding at most 1000 paths.
inline void write_draws_csv(std::ostream& os, std::span<const DensityGrid> draws, std::size_t first,
                            const Json& metadata) {
  constexpr std::size_t kMaxPaths = 1000;
  if (draws.empty()) throw shape_error("no draws to write");
  const std::size_t count = std::min(kMaxPaths, draws.size() - first);
  write_metadata(os, metadata);
  os << 'y';
  for (std::size_t j = 0; j < count; ++j) os << ",path_" << first + j;
  os << '\n';
  const auto& grid = draws.front().grid;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    os << grid[i];
    for (std::size_t j = 0; j < count; ++j) os << ',' << draws[first + j].density[i];
    os << '\n';
  }
}

inline void write_density_csv(std::ostream& os, const DensityGrid& d, const Json& metadata) {
  write_metadata(os, metadata);
  os << "y,density\n";
  for (std::size_t i = 0; i < d.size(); ++i) os << d.grid[i] << ',' << d.density[i] << '\n';
}

inline void write_cone_csv(std::ostream& os, std::span<const ConeRow> rows, double tau, double epsilon,
                           double alpha, const Json& metadata) {
  write_metadata(os, metadata);
  os << "n,m,tau,epsilon,bound,alpha,half_width\n";
  for (const auto& r : rows)
    os << r.n << ',' << r.m << ',' << tau << ',' << epsilon << ',' << r.bound << ',' << alpha << ','
       << r.half_width << '\n';
}

inline Json to_json(const CoherenceReport& report) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "coherence_report";
  j["sup_residual"] = report.sup_residual;
  j["quadrature"] = {{"rule", report.quadrature_rule},
                     {"nodes", report.quadrature_nodes},
                     {"error_estimate", report.quadrature_error}};
  j["mc_paths"] = report.mc_paths ? Json(*report.mc_paths) : Json(nullptr);
  j["grid"] = report.grid;
  j["lhs"] = report.lhs;
  j["rhs"] = report.rhs;
  j["residual"] = report.residual;
  return j;
}

inline CoherenceReport coherence_report_from_json(const Json& j) {
  if (!j.contains("schema_version") || j.at("schema_version").get<int>() != kSchemaVersion)
    throw parse_error("unsupported coherence report schema", 1);
  CoherenceReport r;
  r.sup_residual = j.at("sup_residual").get<double>();
  r.quadrature_rule = j.at("quadrature").at("rule").get<std::string>();
  r.quadrature_nodes = j.at("quadrature").at("nodes").get<std::size_t>();
  r.quadrature_error = j.at("quadrature").at("error_estimate").get<double>();
  if (!j.at("mc_paths").is_null()) r.mc_paths = j.at("mc_paths").get<std::size_t>();
  r.grid = j.at("grid").get<std::vector<double>>();
  r.lhs = j.at("lhs").get<std::vector<double>>();
  r.rhs = j.at("rhs").get<std::vector<double>>();
  r.residual = j.at("residual").get<std::vector<double>>();
  return r;
}

/// Reads the numeric columns of a CSV written by this module.
struct CsvTable {
  Json metadata;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::vector<double> column(const std::string& name) const {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (columns[c] != name) continue;
      std::vector<double> out;
      out.reserve(rows.size());
      for (const auto& r : rows) out.push_back(r.at(c));
      return out;
    }
    throw shape_error("missing column '" + name + "'");
  }
};

inline CsvTable parse_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (table.metadata.is_null()) table.metadata = Json::parse(line.substr(1));
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
    if (table.columns.empty()) {
      table.columns = std::move(fields);
      continue;
    }
    if (fields.size() != table.columns.size()) throw parse_error("ragged CSV row", lineno);
    std::vector<double> row(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c)
      if (!detail::parse_double(detail::trim(fields[c]), row[c]))
        throw parse_error("non-numeric CSV field", lineno);
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace coherent::io
