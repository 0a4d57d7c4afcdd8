#include "cmdp_accel/trace_io.hpp"

#include "cmdp_accel/errors.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace cmdp_accel {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::vector<TraceRow> trace_rows(const RunTrace& trace, const std::string& label,
                                 const Vector& thresholds, double optimal_value, bool use_mixed,
                                 int stride) {
  if (stride < 1) throw InvalidInput("trace stride must be >= 1");
  std::vector<TraceRow> rows;
  const size_t n = trace.records.size();
  for (size_t k = 0; k < n; ++k) {
    const IterationRecord& r = trace.records[k];
    if (r.t % stride != 0 && k + 1 != n) continue;
    TraceRow row;
    row.solver = label;
    row.outer_iter = r.t;
    row.oracle_calls = r.oracle_calls;
    row.V0 = use_mixed ? r.mixed_V0 : r.V0;
    row.gap = optimal_value - row.V0;
    row.violation_l1 = constraint_violation(
        thresholds, use_mixed ? r.mixed_constraint_values : r.constraint_values);
    row.lambda_norm = r.lambda.norm();
    row.lambda_step_norm = r.lambda_step_norm;
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows) {
  out << kTraceHeader << "\n";
  for (const TraceRow& r : rows) {
    out << r.solver << ',' << r.outer_iter << ',' << r.oracle_calls << ',' << fmt(r.V0) << ','
        << fmt(r.gap) << ',' << fmt(r.violation_l1) << ',' << fmt(r.lambda_norm) << ','
        << fmt(r.lambda_step_norm) << "\n";
  }
}

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write '" + path + "'");
  write_trace_csv(out, rows);
}

std::vector<TraceRow> read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader) {
    throw InvalidInput("trace CSV header does not match the expected schema");
  }
  std::vector<TraceRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != 8) {
      throw InvalidInput("trace CSV line " + std::to_string(lineno) + " has " +
                         std::to_string(cells.size()) + " columns, expected 8");
    }
    try {
      TraceRow r;
      r.solver = cells[0];
      r.outer_iter = std::stoi(cells[1]);
      r.oracle_calls = std::stoll(cells[2]);
      r.V0 = std::stod(cells[3]);
      r.gap = std::stod(cells[4]);
      r.violation_l1 = std::stod(cells[5]);
      r.lambda_norm = std::stod(cells[6]);
      r.lambda_step_norm = std::stod(cells[7]);
      rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw InvalidInput("trace CSV line " + std::to_string(lineno) + " has a malformed number");
    }
  }
  return rows;
}

std::vector<TraceRow> read_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open '" + path + "'");
  return read_trace_csv(in);
}

}  // namespace cmdp_accel
