#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pushpull/certify.hpp"
#include "pushpull/config.hpp"
#include "pushpull/digraph.hpp"
#include "pushpull/gossip.hpp"
#include "pushpull/mixing.hpp"
#include "pushpull/objectives.hpp"
#include "pushpull/push_pull.hpp"
#include "pushpull/trace.hpp"

namespace pushpull {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitCertification = 3,
  kExitDivergence = 4,
};

/// Environment variable that overrides output.directory.
inline constexpr const char* kOutputDirEnv = "PUSHPULL_OUTPUT_DIR";

/// Everything a run needs, built deterministically from a configuration.
struct Problem {
  Digraph g_R;  ///< static pull graph (union graph when time-varying)
  Digraph g_C;  ///< static push graph
  std::optional<LeaderFollowerSplit> leader_follower;
  std::vector<bool> is_leader;
  bool time_varying = false;
  GraphSequence sequence;  ///< realized over the common base graph
  ObjectiveSet obj;
  std::vector<bool> active;  ///< agents with nonzero stepsize
};

/// Throws ConfigError for anything the configuration gets wrong, including
/// unreadable graph files (paths are relative to base_dir).
Problem build_problem(const ExperimentConfig& cfg, const std::filesystem::path& base_dir);

/// Static mixing pair of the problem graphs.
MixingPair static_pair(const Problem& p);

/// Per-iteration schedule: static weights, or equal-weight matrices of the
/// realized graph (with the leader-follower link removal when configured).
MixingSchedule make_schedule(const Problem& p);

ValidationReport validate_problem(const Problem& p, const Vec& alphas);
nlohmann::json to_json(const ValidationReport& r);

struct RunContext {
  std::filesystem::path base_dir = ".";
  std::optional<std::filesystem::path> out_dir;  ///< command-line override
  bool write_files = true;
  std::size_t threads = 0;
};

/// Flag override, then PUSHPULL_OUTPUT_DIR, then output.directory.
std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg, const RunContext& ctx);

struct ExperimentOutcome {
  int exit_code = kExitOk;
  nlohmann::json summary;  ///< summary, or the error document when exit_code != 0
  std::vector<RunTrace> traces;   ///< one per seed
  std::optional<RunTrace> mean;   ///< Monte-Carlo mean (gossip)
  std::optional<Certificate> certificate;
  std::vector<std::vector<GossipEventRecord>> events;
  Vec alphas;
  double gamma = 0;
};

/// Machine-readable error document {"error", "key", "message"}.
nlohmann::json error_json(const std::string& kind, const std::string& key,
                          const std::string& message);

/// Build, validate, optionally certify, run and write artifacts. Never
/// throws for configuration problems; they become exit code 2.
ExperimentOutcome run_experiment(const ExperimentConfig& cfg, const RunContext& ctx);

/// Certificate only, plus a predicted-versus-observed comparison when the
/// output directory already holds a trace from a previous run.
ExperimentOutcome certify_experiment(const ExperimentConfig& cfg, const RunContext& ctx);

/// Elementwise mean of equally long traces (truncated to the shortest).
RunTrace mean_trace(const std::vector<RunTrace>& traces);

}  // namespace pushpull
