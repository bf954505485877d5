#include "pushpull/gossip.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "pushpull/rng.hpp"

namespace pushpull {

GossipEvent sample_event(const Digraph& g_R, const Digraph& g_C, double gamma,
                         std::uint64_t seed, std::uint64_t k) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gossip: gamma must lie in (0,1)");
  CounterRng rng(seed, hash_words(0x676f73736970ULL, k));
  GossipEvent ev;
  ev.gamma = gamma;
  ev.i = rng.below(g_R.size());
  const auto& out_R = g_R.out_neighbors(ev.i);
  const auto& out_C = g_C.out_neighbors(ev.i);
  if (!out_R.empty()) ev.j = out_R[rng.below(out_R.size())];
  if (!out_C.empty()) ev.l = out_C[rng.below(out_C.size())];
  return ev;
}

GossipMatrices event_matrices(const GossipEvent& ev, std::size_t n) {
  const auto N = static_cast<Eigen::Index>(n);
  const auto i = static_cast<Eigen::Index>(ev.i);
  GossipMatrices m;
  m.T = Mat::Zero(N, N);
  m.E = Mat::Zero(N, N);
  m.Q = Mat::Zero(N, N);
  m.Q(i, i) = 1.0;
  if (ev.j) {
    const auto j = static_cast<Eigen::Index>(*ev.j);
    m.T(j, i) += 1.0;
    m.T(j, j) -= 1.0;
    m.Q(j, j) = 1.0;
  }
  if (ev.l) {
    const auto l = static_cast<Eigen::Index>(*ev.l);
    m.E(l, i) += 1.0;
    m.E(i, i) -= 1.0;
    m.Q(l, l) = 1.0;
  }
  m.R = Mat::Identity(N, N) + ev.gamma * m.T;
  m.C = Mat::Identity(N, N) + ev.gamma * m.E;
  return m;
}

namespace {

void refresh_gradients(NetworkState& state, const ObjectiveSet& obj, const Mat& x_next,
                       const std::vector<AgentId>& touched) {
  for (AgentId r : touched) {
    const auto row = static_cast<Eigen::Index>(r);
    const Vec g = obj.locals[r].gradient(x_next.row(row).transpose());
    state.y.row(row) += g.transpose() - state.grad.row(row);
    state.grad.row(row) = g.transpose();
  }
  state.x = x_next;
}

void sort_unique(std::vector<AgentId>& ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
}

}  // namespace

void gossip_step(NetworkState& state, const GossipEvent& ev, double alpha,
                 const ObjectiveSet& obj) {
  const auto i = static_cast<Eigen::Index>(ev.i);
  const double g = ev.gamma;
  std::vector<AgentId> touched{ev.i};
  if (ev.j) touched.push_back(*ev.j);
  if (ev.l) touched.push_back(*ev.l);
  sort_unique(touched);

  Mat x_next = state.x;
  if (ev.j) {
    const auto j = static_cast<Eigen::Index>(*ev.j);
    x_next.row(j) = (1.0 - g) * state.x.row(j) + g * state.x.row(i);
  }
  for (AgentId r : touched) {
    const auto row = static_cast<Eigen::Index>(r);
    x_next.row(row) -= alpha * state.y.row(row);
  }
  if (ev.l) {
    const auto l = static_cast<Eigen::Index>(*ev.l);
    const Eigen::RowVectorXd share = g * state.y.row(i);
    state.y.row(i) -= share;
    state.y.row(l) += share;
  }
  refresh_gradients(state, obj, x_next, touched);
  ++state.k;
}

void gossip_general_step(NetworkState& state, const GeneralEvent& ev, const Vec& alphas,
                         const ObjectiveSet& obj) {
  if (!(ev.gamma_R > 0.0 && ev.gamma_R < 1.0) || !(ev.gamma_C > 0.0 && ev.gamma_C < 1.0)) {
    throw std::invalid_argument("gossip: gamma must lie in (0,1)");
  }
  std::vector<AgentId> nR = ev.notify_R, nC = ev.notify_C;
  sort_unique(nR);
  sort_unique(nC);
  if (ev.gamma_C * static_cast<double>(nC.size()) >= 1.0) {
    std::ostringstream msg;
    msg << "gossip: guard gamma_C*|N_C| < 1 violated (gamma_C=" << ev.gamma_C
        << ", |N_C|=" << nC.size() << ")";
    throw std::invalid_argument(msg.str());
  }
  auto in_C = [&](AgentId a) { return std::binary_search(nC.begin(), nC.end(), a); };
  auto in_R = [&](AgentId a) { return std::binary_search(nR.begin(), nR.end(), a); };
  const auto i = static_cast<Eigen::Index>(ev.i);

  Mat x_next = state.x;
  x_next.row(i) -= alphas(i) * state.y.row(i);
  for (AgentId a : nR) {
    const auto j = static_cast<Eigen::Index>(a);
    const double steps = in_C(a) ? 2.0 : 1.0;
    x_next.row(j) = (1.0 - ev.gamma_R) * state.x.row(j) + ev.gamma_R * state.x.row(i) -
                    steps * alphas(j) * state.y.row(j);
  }
  for (AgentId a : nC) {
    if (in_R(a)) continue;
    const auto l = static_cast<Eigen::Index>(a);
    x_next.row(l) -= alphas(l) * state.y.row(l);
  }

  const Eigen::RowVectorXd share = ev.gamma_C * state.y.row(i);
  state.y.row(i) *= 1.0 - ev.gamma_C * static_cast<double>(nC.size());
  for (AgentId a : nC) state.y.row(static_cast<Eigen::Index>(a)) += share;

  std::vector<AgentId> touched{ev.i};
  touched.insert(touched.end(), nR.begin(), nR.end());
  touched.insert(touched.end(), nC.begin(), nC.end());
  sort_unique(touched);
  refresh_gradients(state, obj, x_next, touched);
  ++state.k;
}

void gossip_all_step(NetworkState& state, AgentId i, const Digraph& g_R, const Digraph& g_C,
                     double gamma, const Vec& alphas, const ObjectiveSet& obj) {
  GeneralEvent ev;
  ev.i = i;
  ev.notify_R = g_R.out_neighbors(i);
  ev.notify_C = g_C.out_neighbors(i);
  ev.gamma_R = gamma;
  ev.gamma_C = gamma;
  gossip_general_step(state, ev, alphas, obj);
}

const char* to_string(GossipMode m) {
  switch (m) {
    case GossipMode::restricted:
      return "restricted";
    case GossipMode::general:
      return "general";
    case GossipMode::all:
      return "all";
  }
  return "unknown";
}

GossipMode gossip_mode_from_string(const std::string& name) {
  for (GossipMode m : {GossipMode::restricted, GossipMode::general, GossipMode::all}) {
    if (name == to_string(m)) return m;
  }
  throw std::invalid_argument("unknown gossip mode '" + name + "'");
}

RunTrace run_gossip(const ObjectiveSet& obj, const Digraph& g_R, const Digraph& g_C,
                    const Vec& alphas, const GossipRunOptions& opts,
                    std::vector<GossipEventRecord>* events, NetworkState* final_state) {
  const auto start = std::chrono::steady_clock::now();
  const auto n = static_cast<Eigen::Index>(obj.n);
  if (g_R.size() != obj.n || g_C.size() != obj.n) {
    throw std::invalid_argument("run_gossip: graph size does not match objective");
  }
  if (alphas.size() != n) throw std::invalid_argument("run_gossip: stepsize vector length != n");
  if (opts.mode == GossipMode::restricted && !(alphas.array() == alphas(0)).all()) {
    throw std::invalid_argument("run_gossip: restricted mode needs a common stepsize");
  }
  if (opts.mode == GossipMode::all) {
    for (AgentId a = 0; a < obj.n; ++a) {
      if (opts.gamma * double(g_C.out_neighbors(a).size()) >= 1.0) {
        std::ostringstream msg;
        msg << "gossip: guard gamma*|N_C| < 1 violated at agent " << a + 1 << " (gamma="
            << opts.gamma << ", out-degree " << g_C.out_neighbors(a).size() << ")";
        throw std::invalid_argument(msg.str());
      }
    }
  }
  const Vec u = opts.u.size() ? opts.u : Vec::Ones(n);
  const Vec v = opts.v.size() ? opts.v : Vec::Ones(n);
  NetworkState state =
      init_state(obj, opts.x0 ? *opts.x0 : Mat::Zero(n, static_cast<Eigen::Index>(obj.p)));
  double scale = (state.x.rowwise() - obj.x_star.transpose()).squaredNorm();
  if (!(scale > 0.0)) scale = 1.0;
  const std::uint64_t ratio = std::max<std::uint64_t>(opts.ticks_per_record, 1);

  RunTrace trace;
  auto record = [&](std::uint64_t plot_k) {
    TraceRecord r = measure(state, obj, u, v, scale);
    r.k = plot_k;
    trace.records.push_back(r);
    trace.mean_error.push_back((state.x.transpose() * u / double(n) - obj.x_star).norm());
  };
  record(0);
  trace.status = trace.records.back().residual <= opts.tol ? RunStatus::converged
                                                           : RunStatus::budget_exhausted;
  for (std::uint64_t plot_k = 1; trace.status == RunStatus::budget_exhausted && plot_k <= opts.budget;
       ++plot_k) {
    for (std::uint64_t t = 0; t < ratio; ++t) {
      const std::uint64_t tick = state.k;
      const GossipEvent ev = sample_event(g_R, g_C, opts.gamma, opts.seed, tick);
      switch (opts.mode) {
        case GossipMode::restricted:
          gossip_step(state, ev, alphas(0), obj);
          break;
        case GossipMode::general: {
          GeneralEvent gev;
          gev.i = ev.i;
          if (ev.j) gev.notify_R.push_back(*ev.j);
          if (ev.l) gev.notify_C.push_back(*ev.l);
          gev.gamma_R = gev.gamma_C = opts.gamma;
          gossip_general_step(state, gev, alphas, obj);
          break;
        }
        case GossipMode::all:
          gossip_all_step(state, ev.i, g_R, g_C, opts.gamma, alphas, obj);
          break;
      }
      if (events) {
        GossipEventRecord rec{tick, ev.i, ev.j, ev.l};
        if (opts.mode == GossipMode::all) rec.j = rec.l = std::nullopt;
        events->push_back(rec);
      }
    }
    record(plot_k);
    const double res = trace.records.back().residual;
    if (!std::isfinite(res) || res > opts.divergence_threshold) {
      trace.status = RunStatus::diverged;
      std::ostringstream msg;
      msg << "residual " << res << " exceeded " << opts.divergence_threshold << " at k=" << plot_k;
      trace.diagnostic = msg.str();
    } else if (res <= opts.tol) {
      trace.status = RunStatus::converged;
    }
  }
  if (final_state) *final_state = std::move(state);
  trace.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return trace;
}

void write_event_log(std::ostream& out, const std::vector<GossipEventRecord>& events) {
  out << "k,i_k,j_k,l_k\n";
  for (const auto& e : events) {
    out << e.k << ',' << e.i + 1 << ',';
    if (e.j) out << *e.j + 1;
    out << ',';
    if (e.l) out << *e.l + 1;
    out << '\n';
  }
}

}  // namespace pushpull
