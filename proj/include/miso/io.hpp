#pragma once

#include <cctype>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "miso/dataset.hpp"
#include "miso/linalg.hpp"
#include "miso/solvers.hpp"

namespace miso {

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline bool blank(const std::string& s) {
  for (char c : s)
    if (!std::isspace(static_cast<unsigned char>(c))) return false;
  return true;
}

[[noreturn]] inline void parse_fail(const std::string& path, long line, const std::string& what) {
  std::ostringstream msg;
  msg << path << ":" << line << ": " << what;
  throw std::runtime_error(msg.str());
}

}  // namespace detail

// LIBSVM text format: `<label> <index>:<value> ...`, indices 1-based and
// strictly increasing. `#` starts a comment; blank lines are skipped. The
// feature count is the largest index seen unless p_override is larger.
inline Dataset read_libsvm(const std::string& path, Index p_override = 0) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_libsvm: cannot open " + path);
  std::vector<SparseRow> rows;
  std::vector<double> labels;
  Index max_index = 0;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (detail::blank(line)) continue;
    std::istringstream tokens(line);
    std::string tok;
    if (!(tokens >> tok)) continue;
    std::size_t used = 0;
    double label = 0.0;
    try {
      label = std::stod(tok, &used);
    } catch (const std::exception&) {
      detail::parse_fail(path, line_no, "malformed label '" + tok + "'");
    }
    if (used != tok.size()) detail::parse_fail(path, line_no, "malformed label '" + tok + "'");
    SparseRow row;
    Index prev = 0;
    while (tokens >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos || colon == 0 || colon + 1 == tok.size())
        detail::parse_fail(path, line_no, "malformed token '" + tok + "'");
      long idx = 0;
      double val = 0.0;
      try {
        idx = std::stol(tok.substr(0, colon), &used);
        if (used != colon) throw std::invalid_argument(tok);
        const std::string vs = tok.substr(colon + 1);
        val = std::stod(vs, &used);
        if (used != vs.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        detail::parse_fail(path, line_no, "malformed token '" + tok + "'");
      }
      if (idx < 1) detail::parse_fail(path, line_no, "feature index must be >= 1");
      if (idx <= prev) detail::parse_fail(path, line_no, "non-increasing feature index");
      prev = idx;
      row.indices.push_back(static_cast<Index>(idx - 1));
      row.values.push_back(val);
      max_index = std::max(max_index, static_cast<Index>(idx));
    }
    rows.push_back(std::move(row));
    labels.push_back(label);
  }
  if (rows.empty()) throw std::runtime_error("read_libsvm: no examples in " + path);
  Index p = max_index;
  if (p_override > 0) {
    if (p_override < max_index)
      throw std::runtime_error("read_libsvm: p override smaller than largest index seen");
    p = p_override;
  }
  if (p == 0) throw std::runtime_error("read_libsvm: no features in " + path);
  return Dataset(p, rows, Eigen::Map<Eigen::VectorXd>(labels.data(), static_cast<Index>(labels.size())));
}

inline void write_libsvm(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_libsvm: cannot open " + path);
  for (Index t = 0; t < data.rows(); ++t) {
    out << detail::format_double(data.label(t));
    const SparseRow row = data.row_sparse(t);
    for (std::size_t k = 0; k < row.indices.size(); ++k)
      out << ' ' << (row.indices[k] + 1) << ':' << detail::format_double(row.values[k]);
    out << '\n';
  }
  if (!out) throw std::runtime_error("write_libsvm: write failed for " + path);
}

inline constexpr const char* kTraceCsvHeader = "pass,seconds,objective,duality_gap,stationarity,nnz";

inline void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace,
                            bool with_header = true) {
  if (with_header) out << kTraceCsvHeader << '\n';
  for (const TraceRecord& r : trace) {
    out << detail::format_double(r.pass_count) << ',' << detail::format_double(r.wall_seconds)
        << ',' << detail::format_double(r.objective) << ',';
    if (r.duality_gap) out << detail::format_double(*r.duality_gap);
    out << ',' << detail::format_double(r.stationarity) << ',' << r.nnz << '\n';
  }
}

inline void write_trace_csv(const std::string& path, const std::vector<TraceRecord>& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_trace_csv: cannot open " + path);
  write_trace_csv(out, trace);
  if (!out) throw std::runtime_error("write_trace_csv: write failed for " + path);
}

inline std::vector<TraceRecord> read_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_trace_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != kTraceCsvHeader)
    throw std::runtime_error("read_trace_csv: unexpected header in " + path);
  std::vector<TraceRecord> trace;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::blank(line)) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      fields.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (fields.size() != 6) detail::parse_fail(path, line_no, "expected 6 fields");
    TraceRecord r;
    try {
      r.pass_count = std::stod(fields[0]);
      r.wall_seconds = std::stod(fields[1]);
      r.objective = std::stod(fields[2]);
      if (!fields[3].empty()) r.duality_gap = std::stod(fields[3]);
      r.stationarity = std::stod(fields[4]);
      r.nnz = std::stol(fields[5]);
    } catch (const std::exception&) {
      detail::parse_fail(path, line_no, "malformed record");
    }
    trace.push_back(std::move(r));
  }
  return trace;
}

inline void write_theta(const std::string& path, const ParamVector& theta) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_theta: cannot open " + path);
  for (Index j = 0; j < theta.size(); ++j) out << detail::format_double(theta[j]) << '\n';
  if (!out) throw std::runtime_error("write_theta: write failed for " + path);
}

}  // namespace miso
