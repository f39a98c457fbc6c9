#pragma once

// CSV serialization of traces, averages and raw data.

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "rcpadmm/errors.hpp"
#include "rcpadmm/hankel.hpp"
#include "rcpadmm/solver.hpp"

namespace rcpadmm {

inline constexpr const char* kTraceHeader =
    "run_id,iter,beta,primal_sq,dual_sq,combined,objective,accepted,dldbeta";
inline constexpr const char* kAverageHeader =
    "iter,mean_primal_sq,mean_dual_sq,mean_combined,mean_beta";
inline constexpr const char* kDataHeader = "t,u,y";

/// Shortest representation that round-trips.
inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline void write_trace_rows(std::ostream& os, std::size_t run_id,
                             const std::vector<IterationRecord>& trace) {
  for (const auto& rec : trace) {
    os << run_id << ',' << rec.iter << ',' << format_double(rec.beta) << ','
       << format_double(rec.primal_sq) << ',' << format_double(rec.dual_sq) << ','
       << format_double(rec.combined) << ',' << format_double(rec.objective) << ','
       << (rec.accepted ? 1 : 0) << ',';
    if (rec.dldbeta) os << format_double(*rec.dldbeta);
    os << '\n';
  }
}

struct AverageRow {
  std::size_t iter = 0;
  double primal_sq = 0.0;
  double dual_sq = 0.0;
  double combined = 0.0;
  double beta = 0.0;
};

inline void write_average_csv(std::ostream& os, const std::vector<AverageRow>& rows) {
  os << kAverageHeader << '\n';
  for (const auto& r : rows)
    os << r.iter << ',' << format_double(r.primal_sq) << ',' << format_double(r.dual_sq) << ','
       << format_double(r.combined) << ',' << format_double(r.beta) << '\n';
}

struct DataTable {
  Vector t;
  Vector u;
  Vector y;
};

inline void write_data_csv(std::ostream& os, const DataTable& d) {
  os << kDataHeader << '\n';
  for (Index i = 0; i < d.t.size(); ++i)
    os << format_double(d.t(i)) << ',' << format_double(d.u(i)) << ',' << format_double(d.y(i))
       << '\n';
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& cell, std::size_t line_no) {
  const std::string s = trim(cell);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size())
    throw InvalidArgument("line " + std::to_string(line_no) + ": not a number: '" + s + "'");
  return v;
}

}  // namespace detail

/// Reads columns t,u,y (header required, column order free).
inline DataTable read_data_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidArgument("data csv: empty input");
  const auto header = detail::split_csv_line(line);
  int it = -1, iu = -1, iy = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string h = detail::trim(header[c]);
    if (h == "t") it = static_cast<int>(c);
    if (h == "u") iu = static_cast<int>(c);
    if (h == "y") iy = static_cast<int>(c);
  }
  if (it < 0 || iu < 0 || iy < 0) throw InvalidArgument("data csv: header must contain t,u,y");

  std::vector<double> t, u, y;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw InvalidArgument("data csv line " + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " columns");
    t.push_back(detail::parse_double(cells[it], line_no));
    u.push_back(detail::parse_double(cells[iu], line_no));
    y.push_back(detail::parse_double(cells[iy], line_no));
  }
  DataTable d;
  d.t = Eigen::Map<Vector>(t.data(), static_cast<Index>(t.size()));
  d.u = Eigen::Map<Vector>(u.data(), static_cast<Index>(u.size()));
  d.y = Eigen::Map<Vector>(y.data(), static_cast<Index>(y.size()));
  if (!d.t.allFinite() || !d.u.allFinite() || !d.y.allFinite())
    throw InvalidArgument("data csv: non-finite entries");
  return d;
}

inline DataTable read_data_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open data file '" + path + "'");
  return read_data_csv(in);
}

}  // namespace rcpadmm
