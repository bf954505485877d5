#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace pushpull {

/// Invalid experiment configuration. key() is the dotted path of the
/// offending entry, e.g. "algorithm.budget".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error(key + ": " + message), key_(std::move(key)), message_(message) {}
  const std::string& key() const noexcept { return key_; }
  /// The message without the key prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  std::string key_;
  std::string message_;
};

struct GraphConfig {
  /// random_strongly_connected | ring | complete | star | star_out | star_in | file
  std::string generator = "random_strongly_connected";
  std::size_t n = 0;
  std::size_t m = 0;
  std::uint64_t seed = 0;
  std::string file;  ///< edge list, relative to the config file
};

struct NetworkConfig {
  GraphConfig pull;                 ///< G_R
  std::optional<GraphConfig> push;  ///< G_C, defaults to the pull graph
  std::vector<std::size_t> leaders;  ///< one-based; enables the leader-follower split
  std::uint64_t leader_seed = 0;
  /// With leaders: false runs the plain algorithm on the augmented graph
  /// (same leader links, no link removal).
  bool leader_follower = true;
  double activation_probability = 1.0;  ///< < 1 gives a time-varying sequence
  std::uint64_t activation_seed = 0;
};

/// "auto" (grid search), "theorem" (certified bound), a number, or one
/// value per agent.
struct StepsizeSpec {
  enum class Kind { automatic, theorem, uniform, per_agent } kind = Kind::automatic;
  double value = 0;
  std::vector<double> values;
  std::vector<std::size_t> active;  ///< one-based agents with a nonzero stepsize; empty = all
};

struct AlgorithmConfig {
  std::string family = "pushpull";  ///< pushpull | gossip
  std::string variant = "standard";
  std::string mode = "restricted";  ///< gossip mode
  StepsizeSpec stepsize;
  std::optional<double> gamma;      ///< empty = certified
  std::uint64_t budget = 1000;
  double tol = 0.0;
  std::optional<double> stationarity_tol;
  double divergence_threshold = 1e6;
  std::vector<std::uint64_t> seeds{0};
  std::uint64_t ticks_per_record = 0;  ///< 0 = default for the mode
  std::uint64_t record_every = 1;
  bool certify = false;
  double epsilon = 0.0;  ///< norm construction slack, 0 = chosen per certificate
};

struct OutputConfig {
  std::string directory = "out";
  std::vector<std::string> formats{"csv", "json"};
  bool events = false;
};

struct ExperimentConfig {
  std::string name = "experiment";
  NetworkConfig network;
  nlohmann::json objective;
  AlgorithmConfig algorithm;
  OutputConfig output;
};

/// Throws ConfigError naming the key for unknown keys, wrong types and
/// out-of-range values.
ExperimentConfig parse_config(const nlohmann::json& j);
/// Reads and parses a file; syntax errors are reported as ConfigError with key "<file>".
ExperimentConfig load_config(const std::string& path);

/// Canonical form; parse_config(to_json(c)) reproduces c exactly.
nlohmann::json to_json(const ExperimentConfig& c);

/// FNV-1a 64 of the canonical dump, as 16 hex digits.
std::string config_hash(const ExperimentConfig& c);
std::string fnv1a_hex(const std::string& bytes);

}  // namespace pushpull
