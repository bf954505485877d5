#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace pushpull {

struct TraceRecord {
  std::uint64_t k = 0;
  double residual = 0;         ///< ||x_k - 1x*||^2 / ||x_0 - 1x*||^2
  double consensus_err = 0;    ///< ||x_k - 1 xbar_k||
  double tracking_err = 0;     ///< ||y_k - v ybar_k||
  double identity_defect = 0;  ///< ||1^T y_k - 1^T grad F(x_k)|| / (n L)
};

enum class RunStatus { converged, budget_exhausted, stationary, diverged };

const char* to_string(RunStatus s);

struct RunTrace {
  std::vector<TraceRecord> records;
  /// ||xbar_k - x*|| alongside each record; kept in memory only.
  std::vector<double> mean_error;
  RunStatus status = RunStatus::budget_exhausted;
  std::string diagnostic;
  std::string config_hash;
  double wall_seconds = 0;

  std::vector<double> residuals() const;
  const TraceRecord& last() const { return records.back(); }
};

/// Columns k,residual,consensus_err,tracking_err,identity_defect; doubles
/// printed with 17 significant digits so files are byte-reproducible.
void write_trace_csv(std::ostream& out, const RunTrace& trace);
/// Reads the format above. Throws std::invalid_argument on malformed input.
RunTrace read_trace_csv(std::istream& in);

}  // namespace pushpull
