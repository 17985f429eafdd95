#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "error.hpp"
#include "pattern.hpp"
#include "scoring.hpp"
#include "search.hpp"

namespace cholsel {

// Shortest text that round-trips is not stable across libraries; 17
// significant digits is.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline double parse_number(std::string_view s, std::string_view what) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw ParseError("cannot parse " + std::string(what) + " from '" + std::string(s) + "'");
  return v;
}

inline bool looks_numeric(std::string_view field) {
  try {
    parse_number(field, "field");
    return true;
  } catch (const ParseError&) {
    return false;
  }
}

// Comma-separated rows, one observation per row. A first line whose first
// field is not a number is taken as a header and skipped.
inline Eigen::MatrixXd read_data_csv(std::istream& is) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1 && !looks_numeric(std::string_view(line).substr(0, line.find(',')))) continue;
    std::vector<double> row;
    std::string_view rest(line);
    for (;;) {
      const auto comma = rest.find(',');
      row.push_back(parse_number(rest.substr(0, comma), "value on line " + std::to_string(lineno)));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ParseError("line " + std::to_string(lineno) + " has " + std::to_string(row.size()) +
                       " values, expected " + std::to_string(rows.front().size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("data file has no rows");
  Eigen::MatrixXd Y(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) Y(i, j) = rows[i][j];
  return Y;
}

inline Eigen::MatrixXd read_data_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open data file '" + path + "'");
  return read_data_csv(in);
}

// Header y1..yp, then one row per observation.
inline void write_data_csv(std::ostream& os, const Eigen::MatrixXd& Y) {
  for (Eigen::Index j = 0; j < Y.cols(); ++j) os << (j ? "," : "") << 'y' << j + 1;
  os << '\n';
  for (Eigen::Index i = 0; i < Y.rows(); ++i) {
    for (Eigen::Index j = 0; j < Y.cols(); ++j) {
      if (j) os << ',';
      os << format_number(Y(i, j));
    }
    os << '\n';
  }
}

// Edges as space-separated 1-based "k:j" pairs, for single CSV fields.
inline std::string edges_compact(const SparsityPattern& z) {
  std::string out;
  for (const Edge& e : z.edges()) {
    if (!out.empty()) out += ' ';
    out += std::to_string(e.row + 1) + ':' + std::to_string(e.col + 1);
  }
  return out;
}

// Quotes a field when it holds a separator, quote or newline.
inline std::string csv_field(std::string_view v) {
  if (v.find_first_of(",\"\n") == std::string_view::npos) return std::string(v);
  std::string out = "\"";
  for (char ch : v) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}

// Minimal CSV table builder.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  CsvTable& row() {
    rows_.emplace_back();
    return *this;
  }
  CsvTable& add(std::string v) {
    rows_.back().push_back(csv_field(v));
    return *this;
  }
  CsvTable& add(const char* v) { return add(std::string(v)); }
  CsvTable& add(double v) { return add(format_number(v)); }
  CsvTable& add(long long v) { return add(std::to_string(v)); }
  CsvTable& add(int v) { return add(static_cast<long long>(v)); }
  CsvTable& add(std::size_t v) { return add(std::to_string(v)); }

  void write(std::ostream& os) const {
    write_line(os, header_);
    for (const auto& r : rows_) {
      if (r.size() != header_.size()) throw Error("CSV row width does not match header");
      write_line(os, r);
    }
  }

  std::string str() const {
    std::ostringstream os;
    write(os);
    return os.str();
  }

 private:
  static void write_line(std::ostream& os, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) os << (i ? "," : "") << fields[i];
    os << '\n';
  }

  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

// -inf and nan become null.
inline nlohmann::json json_number(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

inline nlohmann::json to_json(const ScoredPattern& s) {
  nlohmann::json cols = nlohmann::json::array();
  for (double c : s.column_terms) cols.push_back(json_number(c));
  return {{"edges", s.pattern.edge_count()},
          {"total", json_number(s.total)},
          {"prior", json_number(s.prior_term)},
          {"columns", cols},
          {"cap_violated", s.cap_violated},
          {"pattern", pattern_to_string(s.pattern)}};
}

inline nlohmann::json to_json(const SearchResult& r) {
  nlohmann::json top = nlohmann::json::array();
  for (const auto& s : r.top_m) top.push_back(to_json(s));
  nlohmann::json trace = nlohmann::json::array();
  for (double t : r.trace) trace.push_back(json_number(t));
  return {{"best", to_json(r.best)},
          {"top_m", top},
          {"candidates_evaluated", r.candidates_evaluated},
          {"moves", r.moves},
          {"skipped_neighbors", r.skipped_neighbors},
          {"trace", trace}};
}

}  // namespace cholsel
