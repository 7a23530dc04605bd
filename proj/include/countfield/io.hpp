#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "countfield/counts.hpp"
#include "countfield/cross_validation.hpp"
#include "countfield/csv.hpp"
#include "countfield/errors.hpp"
#include "countfield/grid.hpp"
#include "countfield/synthetic.hpp"
#include "countfield/transition.hpp"

namespace countfield {

/// Shortest round-trippable decimal form, stable across runs.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace detail {

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path + " for reading");
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  return out;
}

[[noreturn]] inline void parse_fail(const std::string& path, std::int64_t line,
                                    const std::string& message) {
  throw IoError(path + ":" + std::to_string(line) + ": " + message);
}

inline std::int64_t to_int(const std::string& s, const std::string& path,
                           std::int64_t line) {
  try {
    std::size_t used = 0;
    const std::int64_t v = std::stoll(s, &used);
    if (used != s.size()) parse_fail(path, line, "trailing characters in '" + s + "'");
    return v;
  } catch (const IoError&) {
    throw;
  } catch (const std::exception&) {
    parse_fail(path, line, "not an integer: '" + s + "'");
  }
}

inline double to_double(const std::string& s, const std::string& path, std::int64_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) parse_fail(path, line, "trailing characters in '" + s + "'");
    return v;
  } catch (const IoError&) {
    throw;
  } catch (const std::exception&) {
    parse_fail(path, line, "not a number: '" + s + "'");
  }
}

}  // namespace detail

/// One region code per line; # starts a comment.
inline std::vector<std::string> read_regions(const std::string& path) {
  auto in = detail::open_input(path);
  std::vector<std::string> regions;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string code = csv::trim(line);
    if (!code.empty()) regions.push_back(code);
  }
  if (regions.empty()) throw IoError(path + ": no region codes found");
  return regions;
}

/// Two region codes per line separated by whitespace; # starts a comment.
inline std::vector<std::pair<std::string, std::string>> read_adjacency(
    const std::string& path) {
  auto in = detail::open_input(path);
  std::vector<std::pair<std::string, std::string>> edges;
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::string a, b, extra;
    if (!(ss >> a)) continue;
    if (!(ss >> b)) detail::parse_fail(path, line_no, "expected two region codes");
    if (ss >> extra) detail::parse_fail(path, line_no, "expected exactly two region codes");
    edges.emplace_back(std::move(a), std::move(b));
  }
  return edges;
}

/// CSV region,lat,lon with a header row.
inline CentroidMap read_centroids(const std::string& path) {
  auto in = detail::open_input(path);
  CentroidMap centroids;
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = csv::trim(line);
    if (stripped.empty()) continue;
    if (line_no == 1 && stripped.rfind("region", 0) == 0) continue;
    const auto fields = csv::split(stripped);
    if (fields.size() != 3) detail::parse_fail(path, line_no, "expected region,lat,lon");
    const double lat = detail::to_double(fields[1], path, line_no);
    const double lon = detail::to_double(fields[2], path, line_no);
    if (!centroids.emplace(fields[0], std::make_pair(lat, lon)).second)
      detail::parse_fail(path, line_no, "duplicate region " + fields[0]);
  }
  if (centroids.empty()) throw IoError(path + ": no centroids found");
  return centroids;
}

/// CSV region,slot,count with a header row; per-source-bin population counts.
/// Repeated (region, slot) rows accumulate.
inline std::vector<std::int64_t> read_population_csv(const std::string& path,
                                                     const SourceGrid& grid) {
  auto in = detail::open_input(path);
  std::vector<std::int64_t> z(grid.size(), 0);
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = csv::trim(line);
    if (stripped.empty()) continue;
    if (line_no == 1 && stripped.rfind("region", 0) == 0) continue;
    const auto fields = csv::split(stripped);
    if (fields.size() != 3) detail::parse_fail(path, line_no, "expected region,slot,count");
    int region = -1, slot = -1;
    try {
      region = grid.region_index(fields[0]);
      const std::int64_t s = detail::to_int(fields[1], path, line_no);
      if (s < 0 || s >= grid.time_slots())
        detail::parse_fail(path, line_no, "slot out of range: " + fields[1]);
      slot = static_cast<int>(s);
    } catch (const ValidationError& e) {
      detail::parse_fail(path, line_no, e.what());
    }
    const std::int64_t count = detail::to_int(fields[2], path, line_no);
    if (count < 0) detail::parse_fail(path, line_no, "negative count");
    z[grid.bin(region, slot)] += count;
  }
  return z;
}

/// CSV kind,region,slot,count with a header row; region must be empty for
/// kind 3. Repeated rows accumulate.
inline CountVector read_counts_csv(const std::string& path, const SourceGrid& grid,
                                   const DetectorLayout& layout) {
  auto in = detail::open_input(path);
  std::vector<std::int64_t> x(layout.size(), 0);
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = csv::trim(line);
    if (stripped.empty()) continue;
    if (line_no == 1 && stripped.rfind("kind", 0) == 0) continue;
    const auto fields = csv::split(stripped);
    if (fields.size() != 4)
      detail::parse_fail(path, line_no, "expected kind,region,slot,count");
    const std::int64_t kind = detail::to_int(fields[0], path, line_no);
    const std::int64_t slot = detail::to_int(fields[2], path, line_no);
    const std::int64_t count = detail::to_int(fields[3], path, line_no);
    if (kind < 1 || kind > 3) detail::parse_fail(path, line_no, "kind must be 1, 2 or 3");
    if (slot < 0 || slot >= grid.time_slots())
      detail::parse_fail(path, line_no, "slot out of range: " + fields[2]);
    if (count < 0) detail::parse_fail(path, line_no, "negative count");
    try {
      if (kind == 3) {
        if (!fields[1].empty())
          detail::parse_fail(path, line_no, "region must be empty for kind 3");
        x[layout.no_location_bin(static_cast<int>(slot))] += count;
      } else {
        const int region = grid.region_index(fields[1]);
        const int bin = kind == 1
                            ? layout.precise_bin(region, static_cast<int>(slot))
                            : layout.self_declared_bin(region, static_cast<int>(slot));
        x[bin] += count;
      }
    } catch (const ValidationError& e) {
      detail::parse_fail(path, line_no, e.what());
    }
  }
  return CountVector(layout, std::move(x));
}

inline void write_counts_csv(const std::string& path, const CountVector& counts,
                             const SourceGrid& grid) {
  auto out = detail::open_output(path);
  const DetectorLayout& layout = counts.layout();
  out << "kind,region,slot,count\n";
  for (int i = 0; i < layout.size(); ++i) {
    const DetectorKind k = layout.kind_of(i);
    const int r = layout.region_of(i);
    out << static_cast<int>(k) << ',' << (r >= 0 ? grid.regions()[r] : "") << ','
        << layout.slot_of(i) << ',' << counts[i] << '\n';
  }
  if (!out) throw IoError("failed writing " + path);
}

/// CSV declared,actual,count triples with a header row.
inline std::vector<DeclarePair> read_misdeclare_pairs(const std::string& path) {
  auto in = detail::open_input(path);
  std::vector<DeclarePair> pairs;
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = csv::trim(line);
    if (stripped.empty()) continue;
    if (line_no == 1 && stripped.rfind("declared", 0) == 0) continue;
    const auto fields = csv::split(stripped);
    if (fields.size() != 3)
      detail::parse_fail(path, line_no, "expected declared,actual,count");
    const std::int64_t count = detail::to_int(fields[2], path, line_no);
    if (count < 0) detail::parse_fail(path, line_no, "negative count");
    pairs.push_back({fields[0], fields[1], count});
  }
  return pairs;
}

/// Sparse transition matrix as row,col,value coordinate triples.
inline void write_transition_coo(const std::string& path,
                                 const Eigen::SparseMatrix<double>& p) {
  auto out = detail::open_output(path);
  out << "row,col,value\n";
  for (int col = 0; col < p.outerSize(); ++col)
    for (Eigen::SparseMatrix<double>::InnerIterator it(p, col); it; ++it)
      out << it.row() << ',' << it.col() << ',' << format_double(it.value()) << '\n';
  if (!out) throw IoError("failed writing " + path);
}

inline void write_intensity_csv(const std::string& path, const Eigen::VectorXd& f,
                                const SourceGrid& grid) {
  if (f.size() != grid.size())
    throw DimensionError("write_intensity_csv: length does not match the grid");
  auto out = detail::open_output(path);
  out << "region,slot,intensity\n";
  for (int r = 0; r < grid.num_regions(); ++r)
    for (int t = 0; t < grid.time_slots(); ++t)
      out << grid.regions()[r] << ',' << t << ',' << format_double(f[grid.bin(r, t)])
          << '\n';
  if (!out) throw IoError("failed writing " + path);
}

/// Per-region totals (time aggregated out).
inline void write_spatial_csv(const std::string& path, const Eigen::VectorXd& f,
                              const SourceGrid& grid) {
  if (f.size() != grid.size())
    throw DimensionError("write_spatial_csv: length does not match the grid");
  auto out = detail::open_output(path);
  out << "region,intensity\n";
  for (int r = 0; r < grid.num_regions(); ++r) {
    double sum = 0.0;
    for (int t = 0; t < grid.time_slots(); ++t) sum += f[grid.bin(r, t)];
    out << grid.regions()[r] << ',' << format_double(sum) << '\n';
  }
  if (!out) throw IoError("failed writing " + path);
}

/// Per-slot totals (regions aggregated out).
inline void write_temporal_csv(const std::string& path, const Eigen::VectorXd& f,
                               const SourceGrid& grid) {
  if (f.size() != grid.size())
    throw DimensionError("write_temporal_csv: length does not match the grid");
  auto out = detail::open_output(path);
  out << "slot,intensity\n";
  for (int t = 0; t < grid.time_slots(); ++t) {
    double sum = 0.0;
    for (int r = 0; r < grid.num_regions(); ++r) sum += f[grid.bin(r, t)];
    out << t << ',' << format_double(sum) << '\n';
  }
  if (!out) throw IoError("failed writing " + path);
}

inline void write_population_csv(const std::string& path,
                                 const std::vector<std::int64_t>& z,
                                 const SourceGrid& grid) {
  if (static_cast<int>(z.size()) != grid.size())
    throw DimensionError("write_population_csv: length does not match the grid");
  auto out = detail::open_output(path);
  out << "region,slot,count\n";
  for (int r = 0; r < grid.num_regions(); ++r)
    for (int t = 0; t < grid.time_slots(); ++t)
      out << grid.regions()[r] << ',' << t << ',' << z[grid.bin(r, t)] << '\n';
  if (!out) throw IoError("failed writing " + path);
}

inline nlohmann::json cv_report_to_json(const CvReport& report) {
  nlohmann::json cells = nlohmann::json::array();
  for (std::size_t i = 0; i < report.cells.size(); ++i) {
    const CvCell& c = report.cells[i];
    cells.push_back({{"w_s", c.w_s},
                     {"w_t", c.w_t},
                     {"mean_score", c.mean_score},
                     {"std_score", c.std_score},
                     {"diverged_splits", c.diverged_splits},
                     {"selected", static_cast<int>(i) == report.selected}});
  }
  nlohmann::json j{{"cells", std::move(cells)},
                   {"selected_index", report.selected},
                   {"selected_w_s", report.selected_w_s},
                   {"selected_w_t", report.selected_w_t},
                   {"tie", report.tie}};
  if (report.tie) j["tie_note"] = report.tie_note;
  return j;
}

inline nlohmann::json bench_summary_to_json(const BenchSummary& summary) {
  nlohmann::json per_estimator = nlohmann::json::object();
  for (int e = 0; e < 6; ++e)
    per_estimator[kEstimatorLabels[e]] = {{"median", summary.median_error[e]},
                                          {"iqr", summary.iqr_error[e]}};
  nlohmann::json runs = nlohmann::json::array();
  for (const BenchResult& run : summary.runs) {
    nlohmann::json errors = nlohmann::json::object();
    for (int e = 0; e < 6; ++e) errors[kEstimatorLabels[e]] = run.relative_error[e];
    runs.push_back({{"seed", run.seed},
                    {"relative_error", std::move(errors)},
                    {"kind_totals", run.kind_totals},
                    {"plug_in_zero_bins", run.plug_in_zero_bins},
                    {"w_s", run.w_s},
                    {"w_t", run.w_t}});
  }
  return {{"summary", std::move(per_estimator)}, {"runs", std::move(runs)}};
}

inline void write_bench_csv(const std::string& path,
                            const std::vector<BenchResult>& runs) {
  auto out = detail::open_output(path);
  out << "estimator,seed,relative_error\n";
  for (const BenchResult& run : runs)
    for (int e = 0; e < 6; ++e)
      out << kEstimatorLabels[e] << ',' << run.seed << ','
          << format_double(run.relative_error[e]) << '\n';
  if (!out) throw IoError("failed writing " + path);
}

inline void write_json(const std::string& path, const nlohmann::json& j) {
  auto out = detail::open_output(path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace countfield
