#pragma once

#include <string>
#include <vector>

namespace gebo {

// One row of a persisted run trace. Doubles are written with enough digits
// to round-trip exactly, so parsing a written trace reproduces it.
struct TraceRow {
  int run_id = 0;
  std::string method;
  int iter = 0;
  int n_feval = 0;
  double f = 0.0;
  double f_best = 0.0;
  double opt_norm = 0.0;
  double opt_ratio = 0.0;
  double u_c = 0.0;
  double u_sigma = 0.0;

  bool operator==(const TraceRow&) const = default;
};

std::string format_double(double v);  // shortest exact form

void write_trace_csv(const std::string& path,
                     const std::vector<TraceRow>& rows);
std::vector<TraceRow> read_trace_csv(const std::string& path);

}  // namespace gebo
