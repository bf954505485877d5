#include "pushpull/trace.hpp"

#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace pushpull {

const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::converged:
      return "converged";
    case RunStatus::budget_exhausted:
      return "budget_exhausted";
    case RunStatus::stationary:
      return "stationary";
    case RunStatus::diverged:
      return "diverged";
  }
  return "unknown";
}

std::vector<double> RunTrace::residuals() const {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.residual);
  return out;
}

namespace {
constexpr const char* kHeader = "k,residual,consensus_err,tracking_err,identity_defect";
}

void write_trace_csv(std::ostream& out, const RunTrace& trace) {
  out << kHeader << '\n';
  char buf[160];
  for (const auto& r : trace.records) {
    std::snprintf(buf, sizeof buf, "%llu,%.17g,%.17g,%.17g,%.17g\n",
                  static_cast<unsigned long long>(r.k), r.residual, r.consensus_err,
                  r.tracking_err, r.identity_defect);
    out << buf;
  }
}

RunTrace read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("trace csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kHeader) throw std::invalid_argument("trace csv: unexpected header '" + line + "'");
  RunTrace trace;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> cells;
    std::istringstream row(line);
    for (std::string cell; std::getline(row, cell, ',');) cells.push_back(cell);
    TraceRecord r;
    bool ok = cells.size() == 5;
    double* fields[] = {&r.residual, &r.consensus_err, &r.tracking_err, &r.identity_defect};
    if (ok) {
      char* end = nullptr;
      r.k = std::strtoull(cells[0].c_str(), &end, 10);
      ok = end != cells[0].c_str() && *end == '\0';
      for (std::size_t c = 0; ok && c < 4; ++c) {
        *fields[c] = std::strtod(cells[c + 1].c_str(), &end);
        ok = end != cells[c + 1].c_str() && (*end == '\0' || *end == '\r');
      }
    }
    if (!ok) throw std::invalid_argument("trace csv: malformed line " + std::to_string(lineno));
    if (!trace.records.empty() && r.k <= trace.records.back().k) {
      throw std::invalid_argument("trace csv: k not strictly increasing at line " +
                                  std::to_string(lineno));
    }
    trace.records.push_back(r);
  }
  return trace;
}

}  // namespace pushpull
