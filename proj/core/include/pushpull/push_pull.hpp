#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pushpull/digraph.hpp"
#include "pushpull/mixing.hpp"
#include "pushpull/objectives.hpp"
#include "pushpull/trace.hpp"

namespace pushpull {

struct NetworkState {
  Mat x;             ///< n x p decisions
  Mat y;             ///< n x p trackers
  Mat grad;          ///< grad F(x), cached
  std::uint64_t k = 0;
};

/// x_0 given, y_0 = grad F(x_0). Throws std::invalid_argument on shape mismatch.
NetworkState init_state(const ObjectiveSet& obj, const Mat& x0);

enum class MChoice { automatic, equal, max_root, ratio };

struct StepsizeProfile {
  Vec alphas;
  double alpha_prime = 0;  ///< u^T diag(alphas) v / n
  double alpha_hat = 0;    ///< max alphas
  double M = 0;            ///< alpha_prime >= M alpha_hat
  std::string M_rule;      ///< "u^T v / n", "u_j v_j / n" or "alpha'/alpha_hat"
};

/// automatic: equal if all stepsizes agree, else max_root if the largest one
/// sits on a common root, else ratio. Throws std::invalid_argument when the
/// requested rule does not apply or alphas has negative entries.
StepsizeProfile make_profile(const Vec& alphas, const Vec& u, const Vec& v,
                             MChoice choice = MChoice::automatic);

/// Update orders. "ATC" applies the local adaptation before mixing.
///   standard, half:  x+ = R(x - a y),  y+ = C y + grad F(x+) - grad F(x)
///   atc_x:           x+ = R x - a y,   y+ = C y + grad F(x+) - grad F(x)
///   atc_y:           x+ = R(x - a y),  y+ = C(y + grad F(x+) - grad F(x))
///   atc_both:        x+ = R x - a y,   y+ = C(y + grad F(x+) - grad F(x))
/// half is the single-round form without ATC in the y-update, which is the
/// same recursion as standard; it is kept as its own label for experiments.
enum class Variant { standard, half, atc_x, atc_y, atc_both };

const char* to_string(Variant v);
/// Throws std::invalid_argument for unknown names.
Variant variant_from_string(const std::string& name);

/// One synchronous iteration. diag(alphas) is applied row-wise.
void step(NetworkState& state, const Mat& R, const Mat& C, const Vec& alphas,
          const ObjectiveSet& obj, Variant variant);

/// Supplies (R_k, C_k) for iteration k.
struct MixingSchedule {
  std::function<void(std::uint64_t k, Mat& R, Mat& C)> at;
  Vec u;  ///< weights for xbar in trace metrics
  Vec v;  ///< weights for the tracker target
  bool time_varying = false;
};

MixingSchedule static_schedule(const MixingPair& pair);
/// Rebuilds R_k and C_k with the equal-weight rule from the realized
/// graphs; u = v = 1 in the metrics.
MixingSchedule time_varying_schedule(std::function<Digraph(std::uint64_t)> g_R,
                                     std::function<Digraph(std::uint64_t)> g_C);

struct RunOptions {
  std::uint64_t budget = 1000;
  double tol = 0.0;                 ///< stop when residual <= tol
  std::optional<double> stationarity_tol;  ///< stop when both updates move less
  double divergence_threshold = 1e6;
  std::optional<Mat> x0;            ///< default: zeros
  std::uint64_t record_every = 1;
};

/// Runs until the residual reaches tol, the budget is exhausted, the state
/// is stationary, or the residual exceeds the divergence threshold.
RunTrace run(const ObjectiveSet& obj, const MixingSchedule& schedule, const Vec& alphas,
             Variant variant, const RunOptions& opts, NetworkState* final_state = nullptr);

/// Metrics of `state` as one trace record.
TraceRecord measure(const NetworkState& state, const ObjectiveSet& obj, const Vec& u,
                    const Vec& v, double residual_scale);

struct GridSearchResult {
  double alpha = 0;
  std::size_t index = 0;
  RunTrace trace;
  std::vector<double> candidates;
};

/// Tries alpha_j = 2^-j * 2/(mu+L), j = 0..levels-1, for all agents in
/// `active` (others get 0), in parallel, and keeps the fastest run that did
/// not diverge. Throws std::runtime_error if every candidate diverged.
GridSearchResult grid_search_stepsize(const ObjectiveSet& obj, const MixingSchedule& schedule,
                                      const std::vector<bool>& active, Variant variant,
                                      const RunOptions& opts, std::size_t levels = 12,
                                      std::size_t threads = 0);

/// Applies fn to 0..count-1 on a small worker pool. Results keep index order.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn,
                  std::size_t threads = 0);

}  // namespace pushpull
