#include "pushpull/push_pull.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace pushpull {

NetworkState init_state(const ObjectiveSet& obj, const Mat& x0) {
  if (static_cast<std::size_t>(x0.rows()) != obj.n || static_cast<std::size_t>(x0.cols()) != obj.p) {
    std::ostringstream msg;
    msg << "init_state: x0 is " << x0.rows() << "x" << x0.cols() << ", expected " << obj.n << "x"
        << obj.p;
    throw std::invalid_argument(msg.str());
  }
  NetworkState s;
  s.x = x0;
  s.grad = obj.gradients(x0);
  s.y = s.grad;
  return s;
}

StepsizeProfile make_profile(const Vec& alphas, const Vec& u, const Vec& v, MChoice choice) {
  const auto n = alphas.size();
  if (u.size() != n || v.size() != n) {
    throw std::invalid_argument("make_profile: stepsize vector length does not match n");
  }
  if ((alphas.array() < 0.0).any()) throw std::invalid_argument("make_profile: negative stepsize");
  StepsizeProfile prof;
  prof.alphas = alphas;
  prof.alpha_hat = n ? alphas.maxCoeff() : 0.0;
  prof.alpha_prime = (u.array() * alphas.array() * v.array()).sum() / static_cast<double>(n);

  const bool equal = n > 0 && (alphas.array() == alphas(0)).all();
  Eigen::Index j_max = -1;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (u(i) > 0.0 && v(i) > 0.0 && (j_max < 0 || alphas(i) > alphas(j_max))) j_max = i;
  }
  const bool max_on_root = j_max >= 0 && alphas(j_max) == prof.alpha_hat;

  if (choice == MChoice::automatic) {
    choice = equal ? MChoice::equal : (max_on_root ? MChoice::max_root : MChoice::ratio);
  }
  switch (choice) {
    case MChoice::equal:
      if (!equal) throw std::invalid_argument("make_profile: M rule 'equal' needs equal stepsizes");
      prof.M = u.dot(v) / static_cast<double>(n);
      prof.M_rule = "u^T v / n";
      break;
    case MChoice::max_root:
      if (!max_on_root) {
        throw std::invalid_argument(
            "make_profile: M rule 'max_root' needs the largest stepsize on a common root");
      }
      prof.M = u(j_max) * v(j_max) / static_cast<double>(n);
      prof.M_rule = "u_j v_j / n";
      break;
    case MChoice::ratio:
    case MChoice::automatic:
      prof.M = prof.alpha_hat > 0.0 ? prof.alpha_prime / prof.alpha_hat : 0.0;
      prof.M_rule = "alpha'/alpha_hat";
      break;
  }
  return prof;
}

const char* to_string(Variant v) {
  switch (v) {
    case Variant::standard:
      return "standard";
    case Variant::half:
      return "half";
    case Variant::atc_x:
      return "atc_x";
    case Variant::atc_y:
      return "atc_y";
    case Variant::atc_both:
      return "atc_both";
  }
  return "unknown";
}

Variant variant_from_string(const std::string& name) {
  for (Variant v : {Variant::standard, Variant::half, Variant::atc_x, Variant::atc_y,
                    Variant::atc_both}) {
    if (name == to_string(v)) return v;
  }
  throw std::invalid_argument("unknown variant '" + name + "'");
}

void step(NetworkState& state, const Mat& R, const Mat& C, const Vec& alphas,
          const ObjectiveSet& obj, Variant variant) {
  const Mat ay = alphas.asDiagonal() * state.y;
  Mat x_next;
  switch (variant) {
    case Variant::standard:
    case Variant::half:
    case Variant::atc_y:
      x_next = R * (state.x - ay);
      break;
    case Variant::atc_x:
    case Variant::atc_both:
      x_next = R * state.x - ay;
      break;
  }
  Mat grad_next = obj.gradients(x_next);
  const Mat diff = grad_next - state.grad;
  switch (variant) {
    case Variant::standard:
    case Variant::half:
    case Variant::atc_x:
      state.y = C * state.y + diff;
      break;
    case Variant::atc_y:
    case Variant::atc_both:
      state.y = C * (state.y + diff);
      break;
  }
  state.x = std::move(x_next);
  state.grad = std::move(grad_next);
  ++state.k;
}

MixingSchedule static_schedule(const MixingPair& pair) {
  MixingSchedule s;
  s.u = pair.u;
  s.v = pair.v;
  s.at = [R = pair.R, C = pair.C](std::uint64_t, Mat& R_out, Mat& C_out) {
    if (R_out.size() == 0) {
      R_out = R;
      C_out = C;
    }
  };
  return s;
}

MixingSchedule time_varying_schedule(std::function<Digraph(std::uint64_t)> g_R,
                                     std::function<Digraph(std::uint64_t)> g_C) {
  MixingSchedule s;
  const auto n = static_cast<Eigen::Index>(g_R(0).size());
  s.u = Vec::Ones(n);
  s.v = Vec::Ones(n);
  s.time_varying = true;
  s.at = [g_R = std::move(g_R), g_C = std::move(g_C)](std::uint64_t k, Mat& R, Mat& C) {
    R = build_row_stochastic(g_R(k));
    C = build_column_stochastic(g_C(k));
  };
  return s;
}

TraceRecord measure(const NetworkState& state, const ObjectiveSet& obj, const Vec& u,
                    const Vec& v, double residual_scale) {
  const double n = static_cast<double>(state.x.rows());
  const Vec ones = Vec::Ones(state.x.rows());
  const Vec xbar = state.x.transpose() * u / n;
  const Vec ybar = state.y.colwise().sum().transpose() / n;
  TraceRecord r;
  r.k = state.k;
  r.residual = (state.x.rowwise() - obj.x_star.transpose()).squaredNorm() / residual_scale;
  r.consensus_err = (state.x - ones * xbar.transpose()).norm();
  r.tracking_err = (state.y - v * ybar.transpose()).norm();
  r.identity_defect =
      (state.y.colwise().sum() - state.grad.colwise().sum()).norm() / (n * std::max(obj.L, 1e-300));
  return r;
}

RunTrace run(const ObjectiveSet& obj, const MixingSchedule& schedule, const Vec& alphas,
             Variant variant, const RunOptions& opts, NetworkState* final_state) {
  const auto start = std::chrono::steady_clock::now();
  const auto n = static_cast<Eigen::Index>(obj.n);
  if (alphas.size() != n) throw std::invalid_argument("run: stepsize vector length must equal n");
  NetworkState state =
      init_state(obj, opts.x0 ? *opts.x0 : Mat::Zero(n, static_cast<Eigen::Index>(obj.p)));
  double scale = (state.x.rowwise() - obj.x_star.transpose()).squaredNorm();
  if (!(scale > 0.0)) scale = 1.0;

  RunTrace trace;
  auto record = [&]() {
    trace.records.push_back(measure(state, obj, schedule.u, schedule.v, scale));
    trace.mean_error.push_back(
        (state.x.transpose() * schedule.u / static_cast<double>(n) - obj.x_star).norm());
  };
  record();
  trace.status = RunStatus::budget_exhausted;
  if (trace.records.back().residual <= opts.tol) trace.status = RunStatus::converged;

  Mat R, C;
  const std::uint64_t every = std::max<std::uint64_t>(opts.record_every, 1);
  while (trace.status == RunStatus::budget_exhausted && state.k < opts.budget) {
    schedule.at(state.k, R, C);
    const Mat x_prev = state.x;
    const Mat y_prev = state.y;
    step(state, R, C, alphas, obj, variant);

    const TraceRecord now = measure(state, obj, schedule.u, schedule.v, scale);
    bool stop = false;
    if (!std::isfinite(now.residual) || now.residual > opts.divergence_threshold) {
      trace.status = RunStatus::diverged;
      std::ostringstream msg;
      msg << "residual " << now.residual << " exceeded " << opts.divergence_threshold
          << " at k=" << state.k;
      trace.diagnostic = msg.str();
      stop = true;
    } else if (now.residual <= opts.tol) {
      trace.status = RunStatus::converged;
      stop = true;
    } else if (opts.stationarity_tol && (state.x - x_prev).norm() <= *opts.stationarity_tol &&
               (state.y - y_prev).norm() <= *opts.stationarity_tol) {
      trace.status = RunStatus::stationary;
      stop = true;
    }
    if (stop || state.k % every == 0 || state.k == opts.budget) record();
  }
  if (final_state) *final_state = std::move(state);
  trace.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return trace;
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn,
                  std::size_t threads) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&]() {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

GridSearchResult grid_search_stepsize(const ObjectiveSet& obj, const MixingSchedule& schedule,
                                      const std::vector<bool>& active, Variant variant,
                                      const RunOptions& opts, std::size_t levels,
                                      std::size_t threads) {
  if (active.size() != obj.n) throw std::invalid_argument("grid search: active mask length != n");
  GridSearchResult result;
  const double base = 2.0 / (obj.mu + obj.L);
  for (std::size_t j = 0; j < levels; ++j) result.candidates.push_back(std::ldexp(base, -int(j)));

  std::vector<RunTrace> traces(levels);
  parallel_for(
      levels,
      [&](std::size_t j) {
        Vec alphas(static_cast<Eigen::Index>(obj.n));
        for (std::size_t i = 0; i < obj.n; ++i) alphas(Eigen::Index(i)) = active[i] ? result.candidates[j] : 0.0;
        traces[j] = run(obj, schedule, alphas, variant, opts);
      },
      threads);

  // Fewest iterations to tolerance wins; otherwise the lowest final residual.
  std::optional<std::size_t> best;
  auto better = [&](std::size_t a, std::size_t b) {
    const auto& ta = traces[a];
    const auto& tb = traces[b];
    const bool ca = ta.status == RunStatus::converged, cb = tb.status == RunStatus::converged;
    if (ca != cb) return ca;
    if (ca) return ta.last().k < tb.last().k;
    return ta.last().residual < tb.last().residual;
  };
  for (std::size_t j = 0; j < levels; ++j) {
    if (traces[j].status == RunStatus::diverged) continue;
    if (!best || better(j, *best)) best = j;
  }
  if (!best) throw std::runtime_error("grid search: every candidate stepsize diverged");
  result.index = *best;
  result.alpha = result.candidates[*best];
  result.trace = std::move(traces[*best]);
  return result;
}

}  // namespace pushpull
