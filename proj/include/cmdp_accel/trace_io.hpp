#pragma once

#include "cmdp_accel/arcpo.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace cmdp_accel {

// One CSV row. Column order is fixed:
//   solver,outer_iter,oracle_calls,V0,gap,violation_l1,lambda_norm,lambda_step_norm
struct TraceRow {
  std::string solver;
  int outer_iter = 0;
  long long oracle_calls = 0;
  double V0 = 0;
  double gap = 0;
  double violation_l1 = 0;
  double lambda_norm = 0;
  double lambda_step_norm = 0;
};

inline constexpr const char* kTraceHeader =
    "solver,outer_iter,oracle_calls,V0,gap,violation_l1,lambda_norm,lambda_step_norm";

// Rows for the output policy (use_mixed) or the inner iterate of each record,
// keeping every stride-th iteration and always the last one.
std::vector<TraceRow> trace_rows(const RunTrace& trace, const std::string& label,
                                 const Vector& thresholds, double optimal_value,
                                 bool use_mixed = true, int stride = 1);

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows);
void write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows);

// Parses a file written by write_trace_csv; throws InvalidInput on schema drift.
std::vector<TraceRow> read_trace_csv(const std::string& path);
std::vector<TraceRow> read_trace_csv(std::istream& in);

}  // namespace cmdp_accel
