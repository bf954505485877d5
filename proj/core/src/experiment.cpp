#include "pushpull/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace pushpull {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Raised when every candidate run blows up; maps to the divergence exit code.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when an assumption or certificate check fails; maps to exit code 3.
struct CertificationError : std::runtime_error {
  CertificationError(std::string key, const std::string& message)
      : std::runtime_error(message), key(std::move(key)) {}
  std::string key;
};

Digraph make_graph(const GraphConfig& g, const fs::path& base_dir, const std::string& key) {
  try {
    if (g.generator == "file") {
      const fs::path path = base_dir / g.file;
      std::ifstream in(path);
      if (!in) throw ConfigError(key + ".file", "cannot open '" + path.string() + "'");
      return read_edge_list(in);
    }
    if (g.generator == "random_strongly_connected") return random_strongly_connected(g.n, g.m, g.seed);
    if (g.generator == "ring") return ring_graph(g.n);
    if (g.generator == "complete") return complete_graph(g.n);
    if (g.generator == "star") return bidirectional_star(g.n);
    std::vector<Edge> edges;
    for (AgentId i = 1; i < g.n; ++i) {
      edges.push_back(g.generator == "star_out" ? Edge{0, i} : Edge{i, 0});
    }
    return Digraph(g.n, std::move(edges));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key, e.what());
  }
}

// Objective errors carry their key as the message prefix.
ConfigError objective_error(const std::string& what) {
  const auto colon = what.find(':');
  if (colon != std::string::npos && what.rfind("objective", 0) == 0) {
    return ConfigError(what.substr(0, colon), what.substr(colon + 2 < what.size() ? colon + 2 : colon));
  }
  return ConfigError("objective", what);
}

std::vector<std::size_t> one_based(const std::vector<AgentId>& ids) {
  std::vector<std::size_t> out;
  for (auto i : ids) out.push_back(i + 1);
  return out;
}

std::string graph_hash(const Problem& p) {
  std::ostringstream os;
  write_edge_list(os, p.g_R);
  write_edge_list(os, p.g_C);
  if (p.time_varying) write_edge_list(os, p.sequence.base);
  return fnv1a_hex(os.str());
}

std::uint64_t ticks_per_record(const ExperimentConfig& cfg) {
  if (cfg.algorithm.ticks_per_record > 0) return cfg.algorithm.ticks_per_record;
  return cfg.algorithm.mode == "all" ? 3 : 5;
}

Vec mask_vector(const Problem& p) {
  Vec m(static_cast<Eigen::Index>(p.obj.n));
  for (std::size_t i = 0; i < p.obj.n; ++i) m(Eigen::Index(i)) = p.active[i] ? 1.0 : 0.0;
  return m;
}

RunOptions pushpull_options(const ExperimentConfig& cfg) {
  RunOptions o;
  o.budget = cfg.algorithm.budget;
  o.tol = cfg.algorithm.tol;
  o.stationarity_tol = cfg.algorithm.stationarity_tol;
  o.divergence_threshold = cfg.algorithm.divergence_threshold;
  o.record_every = cfg.algorithm.record_every;
  return o;
}

GossipRunOptions gossip_options(const ExperimentConfig& cfg, double gamma, std::uint64_t seed) {
  GossipRunOptions o;
  o.mode = gossip_mode_from_string(cfg.algorithm.mode);
  o.gamma = gamma;
  o.seed = seed;
  o.ticks_per_record = ticks_per_record(cfg);
  o.budget = cfg.algorithm.budget;
  o.tol = cfg.algorithm.tol;
  o.divergence_threshold = cfg.algorithm.divergence_threshold;
  return o;
}

// State shared by run and certify once the problem is built.
struct Resolved {
  Problem problem;
  Vec alphas;
  double gamma = 0;
  std::string stepsize_source;
  std::optional<GossipAnalysis> analysis;
  std::optional<Theorem1Bound> bound1;
  std::optional<Theorem2Bound> bound2;
  std::optional<RunTrace> grid_trace;  ///< reused when the grid winner is the final run
};

const GossipAnalysis& analysis_of(Resolved& r, std::optional<double> cfg_gamma) {
  if (!r.analysis) {
    try {
      r.analysis = analysis_for_bound(r.problem.g_R, r.problem.g_C, r.problem.obj.mu, r.problem.obj.L,
                                      cfg_gamma);
    } catch (const std::runtime_error& e) {
      throw CertificationError("spanning_trees", e.what());
    }
  }
  return *r.analysis;
}

double resolve_gamma(const ExperimentConfig& cfg, Resolved& r) {
  if (cfg.algorithm.gamma) return *cfg.algorithm.gamma;
  const auto& a = analysis_of(r, cfg.algorithm.gamma);
  try {
    return certified_gamma(a, r.problem.obj.mu, r.problem.obj.L);
  } catch (const std::runtime_error& e) {
    throw CertificationError("gamma", e.what());
  }
}

Vec gossip_grid(const ExperimentConfig& cfg, Resolved& r, std::size_t threads) {
  const auto& obj = r.problem.obj;
  const Vec mask = mask_vector(r.problem);
  constexpr std::size_t kLevels = 12;
  std::vector<RunTrace> traces(kLevels);
  std::vector<double> candidates;
  for (std::size_t j = 0; j < kLevels; ++j) candidates.push_back(std::ldexp(1.0 / obj.L, -int(j)));
  parallel_for(
      kLevels,
      [&](std::size_t j) {
        traces[j] = run_gossip(obj, r.problem.g_R, r.problem.g_C, mask * candidates[j],
                               gossip_options(cfg, r.gamma, cfg.algorithm.seeds.front()));
      },
      threads);
  std::optional<std::size_t> best;
  for (std::size_t j = 0; j < kLevels; ++j) {
    if (traces[j].status == RunStatus::diverged) continue;
    if (!std::isfinite(traces[j].last().residual)) continue;
    if (!best) {
      best = j;
      continue;
    }
    const auto& a = traces[j];
    const auto& b = traces[*best];
    const bool ca = a.status == RunStatus::converged, cb = b.status == RunStatus::converged;
    if ((ca && !cb) || (ca && cb && a.last().k < b.last().k) ||
        (!ca && !cb && a.last().residual < b.last().residual)) {
      best = j;
    }
  }
  if (!best) throw DivergenceError("stepsize grid search: every candidate diverged");
  return mask * candidates[*best];
}

void resolve_stepsizes(const ExperimentConfig& cfg, Resolved& r, std::size_t threads) {
  const auto& st = cfg.algorithm.stepsize;
  const auto& obj = r.problem.obj;
  const auto n = static_cast<Eigen::Index>(obj.n);
  const Vec mask = mask_vector(r.problem);
  const bool gossip = cfg.algorithm.family == "gossip";
  if (gossip) r.gamma = resolve_gamma(cfg, r);

  switch (st.kind) {
    case StepsizeSpec::Kind::uniform:
      r.alphas = mask * st.value;
      r.stepsize_source = "config";
      break;
    case StepsizeSpec::Kind::per_agent: {
      if (Eigen::Index(st.values.size()) != n) {
        throw ConfigError("algorithm.stepsize", "has " + std::to_string(st.values.size()) +
                                                    " entries, expected " + std::to_string(n));
      }
      r.alphas = Eigen::Map<const Vec>(st.values.data(), n).cwiseProduct(mask);
      r.stepsize_source = "config";
      break;
    }
    case StepsizeSpec::Kind::automatic: {
      r.stepsize_source = "grid_search";
      if (gossip) {
        r.alphas = gossip_grid(cfg, r, threads);
      } else {
        try {
          auto res = grid_search_stepsize(obj, make_schedule(r.problem), r.problem.active,
                                          variant_from_string(cfg.algorithm.variant),
                                          pushpull_options(cfg), 12, threads);
          r.alphas = mask * res.alpha;
          r.grid_trace = std::move(res.trace);
        } catch (const std::runtime_error& e) {
          throw DivergenceError(e.what());
        }
      }
      break;
    }
    case StepsizeSpec::Kind::theorem: {
      r.stepsize_source = "theorem";
      if (gossip) {
        const auto& a = analysis_of(r, cfg.algorithm.gamma);
        r.bound2 = bounds_theorem2(a, obj.mu, obj.L, r.gamma);
        if (!r.bound2->gamma_ok) throw CertificationError("gamma", r.bound2->diagnostic);
        r.alphas = mask * r.bound2->alpha_bound;
      } else {
        if (r.problem.time_varying) {
          throw ConfigError("algorithm.stepsize",
                            "\"theorem\" needs a static network (activation_probability = 1)");
        }
        MixingPair pair;
        try {
          pair = static_pair(r.problem);
        } catch (const std::runtime_error& e) {
          throw CertificationError("perron", e.what());
        }
        const auto shape = make_profile(mask, pair.u, pair.v, MChoice::automatic);
        if (!(shape.M > 0.0)) {
          throw CertificationError("positive_root_stepsize",
                                   "no common root agent has a nonzero stepsize");
        }
        NormKit kit;
        try {
          kit = cfg.algorithm.epsilon > 0.0 ? build_norm_kit(pair, cfg.algorithm.epsilon)
                                            : norm_kit_for_bound(pair, obj, shape.M);
        } catch (const std::runtime_error& e) {
          throw CertificationError("epsilon", e.what());
        }
        r.bound1 = alpha_bound_theorem1(sync_constants(pair, kit, obj), shape.M);
        r.alphas = mask * r.bound1->alpha_hat;
      }
      break;
    }
  }
}

Certificate make_certificate(const ExperimentConfig& cfg, Resolved& r) {
  const auto& obj = r.problem.obj;
  Certificate cert;
  if (cfg.algorithm.family == "pushpull") {
    if (r.problem.time_varying) {
      throw ConfigError("network.activation_probability",
                        "certificates need a static network (activation_probability = 1)");
    }
    MixingPair pair;
    try {
      pair = static_pair(r.problem);
    } catch (const std::runtime_error& e) {
      throw CertificationError("perron", e.what());
    }
    const auto profile = make_profile(r.alphas, pair.u, pair.v, MChoice::automatic);
    if (!(profile.M > 0.0)) {
      throw CertificationError("positive_root_stepsize", "no common root agent has a nonzero stepsize");
    }
    const auto shape = make_profile(mask_vector(r.problem), pair.u, pair.v, MChoice::automatic);
    NormKit kit, bound_kit;
    try {
      const double eps = cfg.algorithm.epsilon;
      kit = eps > 0.0 ? build_norm_kit(pair, eps) : norm_kit_for_profile(pair, obj, profile);
      bound_kit = eps > 0.0 ? kit : norm_kit_for_bound(pair, obj, shape.M);
    } catch (const std::runtime_error& e) {
      throw CertificationError("epsilon", e.what());
    }
    const auto bound = alpha_bound_theorem1(sync_constants(pair, bound_kit, obj), shape.M);
    try {
      cert = build_A(pair, kit, obj, profile);
    } catch (const std::invalid_argument& e) {
      throw CertificationError("alpha_prime", e.what());
    }
    cert.alpha_bound = bound.alpha_hat;
    cert.constants["c1"] = bound.c1;
    cert.constants["c2"] = bound.c2;
    cert.constants["c3"] = bound.c3;
    cert.constants["M_bound"] = bound.M;
    cert.constants["bound_strict"] = bound.strict;
    cert.constants["bound_stated"] = bound.stated;
    cert.constants["bound_loose_R"] = bound.loose_R;
    cert.constants["bound_loose_C"] = bound.loose_C;
    cert.constants["bound_descent_cap"] = bound.descent_cap;
    cert.diagnostics.push_back("binding stepsize term: " + bound.binding);
    if (profile.alpha_hat > bound.alpha_hat) {
      cert.diagnostics.push_back("configured max stepsize exceeds the certified bound");
    }
  } else {
    const auto& a = analysis_of(r, cfg.algorithm.gamma);
    const auto bound = bounds_theorem2(a, obj.mu, obj.L, r.gamma);
    if (!bound.gamma_ok) throw CertificationError("gamma", bound.diagnostic);
    const double alpha = r.alphas.maxCoeff();
    if (r.alphas.minCoeff() != alpha) {
      throw CertificationError("stepsize", "the gossip certificate needs a common stepsize");
    }
    cert = build_B(gossip_constants(a, obj.mu, obj.L, r.gamma), alpha);
    cert.alpha_bound = bound.alpha_bound;
    cert.gamma_bound = std::min({bound.gamma_bar_R, bound.gamma_bar_C, bound.gamma_coupling});
    cert.constants["c4"] = bound.c4;
    cert.constants["c5"] = bound.c5;
    cert.constants["c6"] = bound.c6;
    cert.constants["gamma_bar_R"] = bound.gamma_bar_R;
    cert.constants["gamma_bar_C"] = bound.gamma_bar_C;
    cert.constants["gamma_coupling"] = bound.gamma_coupling;
    cert.constants["alpha_strict"] = bound.strict;
    for (const auto& [name, value] : bound.aux) cert.constants["alpha_" + name] = value;
    if (alpha > bound.alpha_bound) {
      cert.diagnostics.push_back("configured stepsize exceeds the certified bound");
    }
    if (cfg.algorithm.mode != "restricted") {
      cert.diagnostics.push_back("certificate describes the single-neighbor mode");
    }
  }
  cert.provenance = json{{"config_hash", config_hash(cfg)},
                         {"graph_hash", graph_hash(r.problem)},
                         {"objective_hash", fnv1a_hex(cfg.objective.dump())},
                         {"epsilon", cfg.algorithm.epsilon}};
  if (!(cert.rho < 1.0)) {
    std::ostringstream msg;
    msg << "spectral radius " << cert.rho << " >= 1: stepsize not certified";
    cert.diagnostics.push_back(msg.str());
  }
  return cert;
}

// Observed decay against the certificate. Residuals are squared errors, so
// the synchronous comparison takes a square root.
json compare_rates(const ExperimentConfig& cfg, const Certificate& cert, const RunTrace& trace) {
  json j{{"predicted", cert.rho}};
  try {
    const RateFit fit = fit_rate(trace);
    double observed = fit.rate;
    if (cfg.algorithm.family == "pushpull") {
      observed = std::sqrt(fit.rate);
      j["unit"] = "error norm per iteration";
    } else {
      observed = std::pow(fit.rate, 1.0 / double(ticks_per_record(cfg)));
      j["unit"] = "squared error per tick";
    }
    j["observed"] = observed;
    j["points"] = fit.points;
    j["floor_reached"] = fit.floor_reached;
    j["consistent"] = observed <= cert.rho + 0.05;
  } catch (const std::invalid_argument& e) {
    j["observed"] = nullptr;
    j["note"] = e.what();
  }
  return j;
}

bool wants(const ExperimentConfig& cfg, const std::string& format) {
  const auto& f = cfg.output.formats;
  return std::find(f.begin(), f.end(), format) != f.end();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

void write_trace(const fs::path& path, const RunTrace& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  write_trace_csv(out, trace);
}

json rate_json(const RunTrace& trace) {
  try {
    const RateFit fit = fit_rate(trace);
    return json{{"rate", fit.rate}, {"points", fit.points}, {"floor_reached", fit.floor_reached}};
  } catch (const std::invalid_argument& e) {
    return json{{"rate", nullptr}, {"note", e.what()}};
  }
}

json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

ExperimentOutcome fail(int code, const std::string& kind, const std::string& key,
                       const std::string& message) {
  ExperimentOutcome out;
  out.exit_code = code;
  out.summary = error_json(kind, key, message);
  return out;
}

template <class Body>
ExperimentOutcome guarded(Body body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    return fail(kExitConfig, "config", e.key(), e.message());
  } catch (const CertificationError& e) {
    return fail(kExitCertification, "certification", e.key, e.what());
  } catch (const DivergenceError& e) {
    return fail(kExitDivergence, "divergence", "algorithm.stepsize", e.what());
  }
}

Resolved prepare(const ExperimentConfig& cfg, const RunContext& ctx) {
  Resolved r;
  r.problem = build_problem(cfg, ctx.base_dir);
  if (cfg.algorithm.family == "gossip" && r.problem.time_varying) {
    throw ConfigError("network.activation_probability", "gossip runs need a static network");
  }
  resolve_stepsizes(cfg, r, ctx.threads);
  const ValidationReport report = validate_problem(r.problem, r.alphas);
  if (!report.ok()) {
    for (const auto& c : report.checks) {
      if (!c.passed) throw CertificationError(c.name, "assumption check failed: " + c.detail);
    }
  }
  return r;
}

}  // namespace

Problem build_problem(const ExperimentConfig& cfg, const fs::path& base_dir) {
  Problem p;
  const Digraph pull = make_graph(cfg.network.pull, base_dir, "network.pull");
  const Digraph push =
      cfg.network.push ? make_graph(*cfg.network.push, base_dir, "network.push") : pull;
  if (push.size() != pull.size()) throw ConfigError("network.push", "size differs from the pull graph");
  const std::size_t n = pull.size();

  p.is_leader.assign(n, false);
  p.g_R = pull;
  p.g_C = push;
  p.sequence.base = pull;
  if (!cfg.network.leaders.empty()) {
    std::vector<AgentId> leaders;
    for (auto id : cfg.network.leaders) {
      if (id < 1 || id > n) throw ConfigError("network.leaders", "id out of range");
      leaders.push_back(id - 1);
      p.is_leader[id - 1] = true;
    }
    try {
      p.leader_follower = leader_follower_split(pull, leaders, cfg.network.leader_seed);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("network.leaders", e.what());
    }
    p.sequence.base = p.leader_follower->augmented;
    p.sequence.protected_edges.insert(p.leader_follower->leader_links.begin(),
                                      p.leader_follower->leader_links.end());
    if (cfg.network.leader_follower) {
      p.g_R = p.leader_follower->pull_graph;
      p.g_C = p.leader_follower->push_graph;
    } else {
      p.g_R = p.g_C = p.leader_follower->augmented;
      p.leader_follower.reset();
      p.is_leader.assign(n, false);
    }
  }
  p.time_varying = cfg.network.activation_probability < 1.0;
  if (p.time_varying && cfg.network.push && !(push == pull)) {
    throw ConfigError("network.push", "time-varying runs realize a single base graph");
  }
  p.sequence.activation_probability = cfg.network.activation_probability;
  p.sequence.seed = cfg.network.activation_seed;

  try {
    p.obj = objective_from_spec(cfg.objective);
  } catch (const std::invalid_argument& e) {
    throw objective_error(e.what());
  } catch (const std::runtime_error& e) {
    throw ConfigError("objective", e.what());
  }
  if (p.obj.n != n) {
    throw ConfigError("objective.n", "objective has " + std::to_string(p.obj.n) +
                                         " agents, network has " + std::to_string(n));
  }
  p.active.assign(n, cfg.algorithm.stepsize.active.empty());
  for (auto id : cfg.algorithm.stepsize.active) {
    if (id < 1 || id > n) throw ConfigError("algorithm.active_agents", "id out of range");
    p.active[id - 1] = true;
  }
  return p;
}

MixingPair static_pair(const Problem& p) { return make_mixing_pair(p.g_R, p.g_C); }

MixingSchedule make_schedule(const Problem& p) {
  if (!p.time_varying) {
    MixingPair pair = static_pair(p);
    return static_schedule(pair);
  }
  const GraphSequence seq = p.sequence;
  if (p.leader_follower) {
    const std::vector<bool> leaders = p.is_leader;
    return time_varying_schedule(
        [seq, leaders](std::uint64_t k) { return drop_leader_inbound(realize(seq, k), leaders); },
        [seq, leaders](std::uint64_t k) { return drop_leader_outbound(realize(seq, k), leaders); });
  }
  return time_varying_schedule([seq](std::uint64_t k) { return realize(seq, k); },
                               [seq](std::uint64_t k) { return realize(seq, k); });
}

ValidationReport validate_problem(const Problem& p, const Vec& alphas) {
  return validate_assumptions(build_row_stochastic(p.g_R), build_column_stochastic(p.g_C), alphas);
}

json to_json(const ValidationReport& r) {
  json checks = json::array();
  for (const auto& c : r.checks) {
    checks.push_back(json{{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  }
  return json{{"ok", r.ok()},
              {"checks", checks},
              {"roots_R", one_based(r.roots_R)},
              {"roots_CT", one_based(r.roots_CT)},
              {"common_roots", one_based(r.common_roots)}};
}

fs::path resolve_output_dir(const ExperimentConfig& cfg, const RunContext& ctx) {
  if (ctx.out_dir) return *ctx.out_dir;
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return fs::path(env);
  return fs::path(cfg.output.directory);
}

json error_json(const std::string& kind, const std::string& key, const std::string& message) {
  return json{{"error", kind}, {"key", key}, {"message", message}};
}

RunTrace mean_trace(const std::vector<RunTrace>& traces) {
  RunTrace out;
  if (traces.empty()) return out;
  std::size_t len = traces.front().records.size();
  for (const auto& t : traces) len = std::min(len, t.records.size());
  const double m = double(traces.size());
  out.records.resize(len);
  out.mean_error.assign(len, 0.0);
  for (std::size_t i = 0; i < len; ++i) {
    auto& r = out.records[i];
    r.k = traces.front().records[i].k;
    for (const auto& t : traces) {
      r.residual += t.records[i].residual / m;
      r.consensus_err += t.records[i].consensus_err / m;
      r.tracking_err += t.records[i].tracking_err / m;
      r.identity_defect += t.records[i].identity_defect / m;
      if (i < t.mean_error.size()) out.mean_error[i] += t.mean_error[i] / m;
    }
  }
  out.status = traces.front().status;
  for (const auto& t : traces) {
    if (t.status == RunStatus::diverged) out.status = RunStatus::diverged;
  }
  out.config_hash = traces.front().config_hash;
  return out;
}

ExperimentOutcome run_experiment(const ExperimentConfig& cfg, const RunContext& ctx) {
  return guarded([&]() {
    Resolved r = prepare(cfg, ctx);
    ExperimentOutcome out;
    out.alphas = r.alphas;
    out.gamma = r.gamma;
    const std::string hash = config_hash(cfg);
    const auto& obj = r.problem.obj;

    if (cfg.algorithm.certify) out.certificate = make_certificate(cfg, r);

    if (cfg.algorithm.family == "pushpull") {
      RunTrace trace;
      if (r.grid_trace) {
        trace = std::move(*r.grid_trace);
      } else {
        trace = run(obj, make_schedule(r.problem), r.alphas,
                    variant_from_string(cfg.algorithm.variant), pushpull_options(cfg));
      }
      trace.config_hash = hash;
      out.traces.push_back(std::move(trace));
    } else {
      const auto& seeds = cfg.algorithm.seeds;
      out.traces.resize(seeds.size());
      if (cfg.output.events) out.events.resize(seeds.size());
      try {
        parallel_for(
            seeds.size(),
            [&](std::size_t s) {
              out.traces[s] = run_gossip(obj, r.problem.g_R, r.problem.g_C, r.alphas,
                                         gossip_options(cfg, r.gamma, seeds[s]),
                                         cfg.output.events ? &out.events[s] : nullptr);
              out.traces[s].config_hash = hash;
            },
            ctx.threads);
      } catch (const std::invalid_argument& e) {
        throw ConfigError("algorithm.gamma", e.what());
      }
      out.mean = mean_trace(out.traces);
    }

    const RunTrace& headline = out.mean ? *out.mean : out.traces.front();
    json summary{{"name", cfg.name},
                 {"config_hash", hash},
                 {"family", cfg.algorithm.family},
                 {"status", to_string(headline.status)},
                 {"iterations", headline.last().k},
                 {"final_residual", headline.last().residual},
                 {"stepsizes", vec_json(r.alphas)},
                 {"stepsize_source", r.stepsize_source},
                 {"rate", rate_json(headline)},
                 {"time_varying", r.problem.time_varying},
                 {"leader_follower", r.problem.leader_follower.has_value()}};
    if (cfg.algorithm.family == "pushpull") {
      summary["variant"] = cfg.algorithm.variant;
      summary["wall_seconds"] = out.traces.front().wall_seconds;
    } else {
      summary["mode"] = cfg.algorithm.mode;
      summary["gamma"] = r.gamma;
      summary["ticks_per_record"] = ticks_per_record(cfg);
      json runs = json::array();
      for (std::size_t s = 0; s < out.traces.size(); ++s) {
        runs.push_back(json{{"seed", cfg.algorithm.seeds[s]},
                            {"status", to_string(out.traces[s].status)},
                            {"final_residual", out.traces[s].last().residual}});
      }
      summary["runs"] = runs;
    }
    if (out.certificate) {
      summary["certificate"] = {{"rho", out.certificate->rho},
                                {"alpha_bound", out.certificate->alpha_bound},
                                {"comparison", compare_rates(cfg, *out.certificate, headline)}};
    }

    std::string divergence;
    for (const auto& t : out.traces) {
      if (t.status == RunStatus::diverged) divergence = t.diagnostic;
    }

    if (ctx.write_files) {
      const fs::path dir = resolve_output_dir(cfg, ctx);
      fs::create_directories(dir);
      if (wants(cfg, "csv")) {
        if (out.mean) {
          for (std::size_t s = 0; s < out.traces.size(); ++s) {
            write_trace(dir / ("trace_seed_" + std::to_string(cfg.algorithm.seeds[s]) + ".csv"),
                        out.traces[s]);
          }
          write_trace(dir / "trace_mean.csv", *out.mean);
        } else {
          write_trace(dir / "trace.csv", out.traces.front());
        }
        for (std::size_t s = 0; s < out.events.size(); ++s) {
          std::ofstream ev(dir / ("events_seed_" + std::to_string(cfg.algorithm.seeds[s]) + ".csv"),
                           std::ios::binary);
          write_event_log(ev, out.events[s]);
        }
      }
      if (wants(cfg, "json")) {
        write_text(dir / "summary.json", summary.dump(2) + "\n");
        if (out.certificate) {
          write_text(dir / "certificate.json", to_json(*out.certificate).dump(2) + "\n");
        }
      }
    }

    if (!divergence.empty()) {
      out.exit_code = kExitDivergence;
      json err = error_json("divergence", "algorithm.stepsize", divergence);
      err["summary"] = summary;
      out.summary = err;
      return out;
    }
    if (out.certificate && !(out.certificate->rho < 1.0)) {
      out.exit_code = kExitCertification;
      json err = error_json("certification", "rho", out.certificate->diagnostics.back());
      err["summary"] = summary;
      out.summary = err;
      return out;
    }
    out.summary = summary;
    return out;
  });
}

ExperimentOutcome certify_experiment(const ExperimentConfig& cfg, const RunContext& ctx) {
  return guarded([&]() {
    Resolved r = prepare(cfg, ctx);
    ExperimentOutcome out;
    out.alphas = r.alphas;
    out.gamma = r.gamma;
    out.certificate = make_certificate(cfg, r);
    json doc = to_json(*out.certificate);

    const fs::path dir = resolve_output_dir(cfg, ctx);
    const fs::path previous = dir / (cfg.algorithm.family == "gossip" ? "trace_mean.csv" : "trace.csv");
    if (fs::exists(previous)) {
      std::ifstream in(previous);
      try {
        doc["comparison"] = compare_rates(cfg, *out.certificate, read_trace_csv(in));
        doc["comparison"]["trace"] = previous.string();
      } catch (const std::invalid_argument& e) {
        doc["comparison"] = {{"note", std::string("unreadable trace: ") + e.what()}};
      }
    }
    if (cfg.algorithm.family == "pushpull") {
      doc["M_rule"] = out.certificate->diagnostics.front();
    }
    if (ctx.write_files) {
      fs::create_directories(dir);
      write_text(dir / "certificate.json", doc.dump(2) + "\n");
    }
    out.summary = doc;
    if (!(out.certificate->rho < 1.0)) out.exit_code = kExitCertification;
    return out;
  });
}

}  // namespace pushpull
