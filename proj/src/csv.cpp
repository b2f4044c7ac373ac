#include "gebo/csv.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gebo {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_trace_csv(const std::string& path,
                     const std::vector<TraceRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out << "run_id,method,iter,n_feval,f,f_best,opt_norm,opt_ratio,u_c,u_sigma\n";
  for (const TraceRow& r : rows) {
    out << r.run_id << ',' << r.method << ',' << r.iter << ',' << r.n_feval
        << ',' << format_double(r.f) << ',' << format_double(r.f_best) << ','
        << format_double(r.opt_norm) << ',' << format_double(r.opt_ratio)
        << ',' << format_double(r.u_c) << ',' << format_double(r.u_sigma)
        << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_double(const std::string& s) {
  return std::strtod(s.c_str(), nullptr);
}

}  // namespace

std::vector<TraceRow> read_trace_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for read: " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("empty trace file: " + path);
  std::vector<TraceRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto fields = split_line(line);
    if (fields.size() != 10)
      throw std::runtime_error("malformed trace row in " + path + ": " + line);
    TraceRow r;
    r.run_id = std::stoi(fields[0]);
    r.method = fields[1];
    r.iter = std::stoi(fields[2]);
    r.n_feval = std::stoi(fields[3]);
    r.f = parse_double(fields[4]);
    r.f_best = parse_double(fields[5]);
    r.opt_norm = parse_double(fields[6]);
    r.opt_ratio = parse_double(fields[7]);
    r.u_c = parse_double(fields[8]);
    r.u_sigma = parse_double(fields[9]);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace gebo
