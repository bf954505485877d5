// pushpull command-line tool: gen-graph, validate, certify, run, fit-rate.
#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "pushpull/certify.hpp"
#include "pushpull/experiment.hpp"

using namespace pushpull;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

int emit(const json& doc, int code) {
  std::cout << doc.dump(2) << "\n";
  return code;
}

int config_failure(const std::string& key, const std::string& message) {
  std::cerr << "pushpull: " << key << ": " << message << "\n";
  return emit(error_json("config", key, message), kExitConfig);
}

Vec parse_alphas(const std::vector<double>& values, std::size_t n) {
  if (values.empty()) return Vec::Ones(Eigen::Index(n));
  if (values.size() != n) {
    throw ConfigError("--alphas", "expected " + std::to_string(n) + " values");
  }
  return Eigen::Map<const Vec>(values.data(), Eigen::Index(n));
}

Digraph load_graph(const std::string& path, const std::string& flag) {
  std::ifstream in(path);
  if (!in) throw ConfigError(flag, "cannot open '" + path + "'");
  try {
    return read_edge_list(in);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(flag, e.what());
  }
}

Mat load_matrix(const std::string& path, const std::string& flag) {
  std::ifstream in(path);
  if (!in) throw ConfigError(flag, "cannot open '" + path + "'");
  try {
    return read_matrix_csv(in);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(flag, e.what());
  }
}

json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

void print_report(const ValidationReport& r) {
  for (const auto& c : r.checks) {
    std::cerr << (c.passed ? "  ok    " : "  FAIL  ") << c.name;
    if (!c.detail.empty()) std::cerr << ": " << c.detail;
    std::cerr << "\n";
  }
}

struct GenGraphArgs {
  std::string kind = "random";
  std::size_t n = 12;
  std::size_t m = 24;
  std::uint64_t seed = 0;
  std::vector<std::size_t> leaders;
  std::uint64_t leader_seed = 0;
  std::string role = "augmented";
  std::string out;
};

int cmd_gen_graph(const GenGraphArgs& a) {
  Digraph g;
  try {
    if (a.kind == "random") g = random_strongly_connected(a.n, a.m, a.seed);
    else if (a.kind == "ring") g = ring_graph(a.n);
    else if (a.kind == "complete") g = complete_graph(a.n);
    else g = bidirectional_star(a.n);
    if (!a.leaders.empty()) {
      std::vector<AgentId> ids;
      for (auto id : a.leaders) {
        if (id < 1 || id > a.n) return config_failure("--leaders", "id out of range");
        ids.push_back(id - 1);
      }
      const auto split = leader_follower_split(g, ids, a.leader_seed);
      g = a.role == "pull" ? split.pull_graph : a.role == "push" ? split.push_graph : split.augmented;
    }
  } catch (const std::invalid_argument& e) {
    return config_failure("gen-graph", e.what());
  }
  if (a.out.empty()) {
    write_edge_list(std::cout, g);
  } else {
    std::ofstream out(a.out, std::ios::binary);
    if (!out) return config_failure("--out", "cannot write '" + a.out + "'");
    write_edge_list(out, g);
  }
  return kExitOk;
}

struct ValidateArgs {
  std::string config;
  std::string graph, push_graph;
  std::string R, C;
  std::vector<double> alphas;
};

int cmd_validate(const ValidateArgs& a) {
  try {
    Mat R, C;
    Vec alphas;
    if (!a.config.empty()) {
      const auto cfg = load_config(a.config);
      const auto problem = build_problem(cfg, fs::path(a.config).parent_path());
      R = build_row_stochastic(problem.g_R);
      C = build_column_stochastic(problem.g_C);
      alphas = a.alphas.empty() ? Vec::Ones(Eigen::Index(problem.obj.n)) : parse_alphas(a.alphas, problem.obj.n);
      if (a.alphas.empty()) {
        for (std::size_t i = 0; i < problem.active.size(); ++i) {
          if (!problem.active[i]) alphas(Eigen::Index(i)) = 0;
        }
      }
    } else if (!a.graph.empty()) {
      const Digraph g_R = load_graph(a.graph, "--graph");
      const Digraph g_C = a.push_graph.empty() ? g_R : load_graph(a.push_graph, "--push-graph");
      if (g_C.size() != g_R.size()) throw ConfigError("--push-graph", "size differs from --graph");
      R = build_row_stochastic(g_R);
      C = build_column_stochastic(g_C);
      alphas = parse_alphas(a.alphas, g_R.size());
    } else if (!a.R.empty() && !a.C.empty()) {
      R = load_matrix(a.R, "--R");
      C = load_matrix(a.C, "--C");
      if (R.rows() != C.rows()) throw ConfigError("--C", "size differs from --R");
      alphas = parse_alphas(a.alphas, std::size_t(R.rows()));
    } else {
      throw ConfigError("validate", "give a config, --graph, or both --R and --C");
    }

    const ValidationReport report = validate_assumptions(R, C, alphas);
    json doc = to_json(report);
    doc["stepsizes"] = vec_json(alphas);
    try {
      const MixingPair pair = make_mixing_pair(R, C);
      doc["u"] = vec_json(pair.u);
      doc["v"] = vec_json(pair.v);
      doc["rho_R"] = pair.rho_R;
      doc["rho_C"] = pair.rho_C;
    } catch (const std::exception& e) {
      doc["perron_note"] = e.what();
    }
    print_report(report);
    return emit(doc, report.ok() ? kExitOk : kExitCertification);
  } catch (const ConfigError& e) {
    return config_failure(e.key(), e.message());
  }
}

struct ExperimentArgs {
  std::string config;
  std::string out_dir;
  std::size_t threads = 0;
};

int cmd_experiment(const ExperimentArgs& a, bool certify_only) {
  ExperimentConfig cfg;
  try {
    cfg = load_config(a.config);
  } catch (const ConfigError& e) {
    return config_failure(e.key(), e.message());
  }
  RunContext ctx;
  ctx.base_dir = fs::path(a.config).parent_path();
  if (ctx.base_dir.empty()) ctx.base_dir = ".";
  if (!a.out_dir.empty()) ctx.out_dir = fs::path(a.out_dir);
  ctx.threads = a.threads;
  const ExperimentOutcome out = certify_only ? certify_experiment(cfg, ctx) : run_experiment(cfg, ctx);
  if (out.exit_code != kExitOk && out.summary.contains("message")) {
    std::cerr << "pushpull: " << out.summary.value("key", "") << ": "
              << out.summary.value("message", "") << "\n";
  }
  if (out.exit_code != kExitOk && out.exit_code != kExitConfig) {
    try {
      const fs::path dir = resolve_output_dir(cfg, ctx);
      fs::create_directories(dir);
      std::ofstream(dir / "error.json", std::ios::binary) << out.summary.dump(2) << "\n";
    } catch (const std::exception&) {
    }
  }
  return emit(out.summary, out.exit_code);
}

struct FitArgs {
  std::string trace;
  std::string column = "residual";
  double begin = 0;
  double end = 1e300;
  double floor = 1e-14;
  std::size_t min_points = 20;
};

int cmd_fit_rate(const FitArgs& a) {
  std::ifstream in(a.trace);
  if (!in) return config_failure("trace", "cannot open '" + a.trace + "'");
  RunTrace trace;
  try {
    trace = read_trace_csv(in);
  } catch (const std::invalid_argument& e) {
    return config_failure("trace", e.what());
  }
  std::vector<double> k, values;
  for (const auto& r : trace.records) {
    k.push_back(double(r.k));
    if (a.column == "residual") values.push_back(r.residual);
    else if (a.column == "consensus_err") values.push_back(r.consensus_err);
    else if (a.column == "tracking_err") values.push_back(r.tracking_err);
    else values.push_back(r.identity_defect);
  }
  try {
    const RateFit fit = fit_rate(k, values, FitWindow{a.begin, a.end, a.floor, a.min_points});
    return emit(json{{"column", a.column},
                     {"rate", fit.rate},
                     {"slope", fit.slope},
                     {"intercept", fit.intercept},
                     {"points", fit.points},
                     {"floor_reached", fit.floor_reached}},
                kExitOk);
  } catch (const std::invalid_argument& e) {
    return config_failure("window", e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Push-Pull distributed gradient methods over directed graphs"};
  app.require_subcommand(1);

  GenGraphArgs gen;
  auto* g = app.add_subcommand("gen-graph", "write an edge list (first line 'n m', 1-based ids)");
  g->add_option("--kind", gen.kind)->check(CLI::IsMember({"random", "ring", "complete", "star"}));
  g->add_option("--n", gen.n)->check(CLI::PositiveNumber);
  g->add_option("--m", gen.m, "edge count for --kind random");
  g->add_option("--seed", gen.seed);
  g->add_option("--leaders", gen.leaders, "one-based leader ids")->delimiter(',');
  g->add_option("--leader-seed", gen.leader_seed);
  g->add_option("--role", gen.role, "with --leaders: augmented, pull or push graph")
      ->check(CLI::IsMember({"augmented", "pull", "push"}));
  g->add_option("--out", gen.out, "output file (default stdout)");

  ValidateArgs val;
  auto* v = app.add_subcommand("validate", "check the mixing assumptions");
  v->add_option("config", val.config, "experiment config");
  v->add_option("--graph", val.graph, "pull graph edge list");
  v->add_option("--push-graph", val.push_graph, "push graph edge list (default --graph)");
  v->add_option("--R", val.R, "row-stochastic matrix CSV");
  v->add_option("--C", val.C, "column-stochastic matrix CSV");
  v->add_option("--alphas", val.alphas, "stepsizes, comma separated")->delimiter(',');

  ExperimentArgs cert_args, run_args;
  auto* c = app.add_subcommand("certify", "build the convergence certificate");
  c->add_option("config", cert_args.config)->required();
  c->add_option("--out-dir", cert_args.out_dir);
  c->add_option("--threads", cert_args.threads);

  auto* r = app.add_subcommand("run", "run an experiment and write its artifacts");
  r->add_option("config", run_args.config)->required();
  r->add_option("--out-dir", run_args.out_dir);
  r->add_option("--threads", run_args.threads);

  FitArgs fit;
  auto* f = app.add_subcommand("fit-rate", "fit a linear rate to a trace column");
  f->add_option("trace", fit.trace)->required();
  f->add_option("--column", fit.column)
      ->check(CLI::IsMember({"residual", "consensus_err", "tracking_err", "identity_defect"}));
  f->add_option("--begin", fit.begin);
  f->add_option("--end", fit.end);
  f->add_option("--floor", fit.floor);
  f->add_option("--min-points", fit.min_points);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*g) return cmd_gen_graph(gen);
    if (*v) return cmd_validate(val);
    if (*c) return cmd_experiment(cert_args, true);
    if (*r) return cmd_experiment(run_args, false);
    if (*f) return cmd_fit_rate(fit);
  } catch (const ConfigError& e) {
    return config_failure(e.key(), e.message());
  }
  return kExitConfig;
}
