#include "pushpull/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace pushpull {

namespace {

using nlohmann::json;

// Reads one JSON object, remembering which keys were consumed so leftovers
// can be reported.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "must be an object");
  }

  std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }
  bool has(const std::string& k) const { return j_.contains(k) && !j_.at(k).is_null(); }

  const json& raw(const std::string& k) {
    seen_.insert(k);
    if (!j_.contains(k)) throw ConfigError(key(k), "missing");
    return j_.at(k);
  }

  template <class T>
  T get(const std::string& k) {
    const json& v = raw(k);
    try {
      check_kind<T>(v, k);
      return v.get<T>();
    } catch (const json::exception&) {
      throw ConfigError(key(k), "wrong type");
    }
  }

  template <class T>
  T get(const std::string& k, T fallback) {
    seen_.insert(k);
    return has(k) ? get<T>(k) : fallback;
  }

  void mark(const std::string& k) { seen_.insert(k); }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ConfigError(key(item.key()), "unknown key");
    }
  }

 private:
  template <class T>
  void check_kind(const json& v, const std::string& k) const {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(key(k), "expected a boolean");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(key(k), "expected a string");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(key(k), "expected a number");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer() || v.get<std::int64_t>() < 0) throw ConfigError(key(k), "expected a nonnegative integer");
    } else {
      if (!v.is_array()) throw ConfigError(key(k), "expected an array");
    }
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& key, const std::string& message) {
  if (!ok) throw ConfigError(key, message);
}

const std::set<std::string> kGenerators{"random_strongly_connected", "ring", "complete", "star",
                                        "star_out", "star_in", "file"};

GraphConfig parse_graph(const json& j, const std::string& path) {
  Section s(j, path);
  GraphConfig g;
  g.generator = s.get<std::string>("generator", g.generator);
  require(kGenerators.count(g.generator) > 0, s.key("generator"),
          "unknown generator '" + g.generator + "'");
  g.n = s.get<std::size_t>("n", 0);
  g.m = s.get<std::size_t>("m", 0);
  g.seed = s.get<std::uint64_t>("seed", 0);
  g.file = s.get<std::string>("file", "");
  if (g.generator == "file") {
    require(!g.file.empty(), s.key("file"), "required when generator is 'file'");
  } else {
    require(g.n >= 1, s.key("n"), "must be at least 1");
  }
  if (g.generator == "random_strongly_connected") {
    require(g.m >= g.n || g.n == 1, s.key("m"), "must be at least n for a strongly connected graph");
    require(g.m <= g.n * (g.n - 1), s.key("m"), "exceeds n(n-1)");
  }
  s.finish();
  return g;
}

json graph_json(const GraphConfig& g) {
  return json{{"generator", g.generator}, {"n", g.n}, {"m", g.m}, {"seed", g.seed},
              {"file", g.file}};
}

StepsizeSpec parse_stepsize(Section& a) {
  StepsizeSpec st;
  const std::string key = a.key("stepsize");
  if (a.has("stepsize")) {
    const json& v = a.raw("stepsize");
    if (v.is_string()) {
      const auto name = v.get<std::string>();
      if (name == "auto") {
        st.kind = StepsizeSpec::Kind::automatic;
      } else if (name == "theorem") {
        st.kind = StepsizeSpec::Kind::theorem;
      } else {
        throw ConfigError(key, "expected \"auto\", \"theorem\", a number or an array");
      }
    } else if (v.is_number()) {
      st.kind = StepsizeSpec::Kind::uniform;
      st.value = v.get<double>();
      require(st.value > 0.0, key, "must be positive");
    } else if (v.is_array()) {
      st.kind = StepsizeSpec::Kind::per_agent;
      for (const auto& e : v) {
        require(e.is_number(), key, "array entries must be numbers");
        st.values.push_back(e.get<double>());
        require(st.values.back() >= 0.0, key, "entries must be nonnegative");
      }
      require(!st.values.empty(), key, "must not be empty");
    } else {
      throw ConfigError(key, "expected \"auto\", \"theorem\", a number or an array");
    }
  } else {
    a.mark("stepsize");
  }
  st.active = a.get<std::vector<std::size_t>>("active_agents", {});
  for (auto id : st.active) require(id >= 1, a.key("active_agents"), "ids are one-based");
  return st;
}

json stepsize_json(const StepsizeSpec& st) {
  switch (st.kind) {
    case StepsizeSpec::Kind::automatic:
      return "auto";
    case StepsizeSpec::Kind::theorem:
      return "theorem";
    case StepsizeSpec::Kind::uniform:
      return st.value;
    case StepsizeSpec::Kind::per_agent:
      return st.values;
  }
  return nullptr;
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
  Section root(j, "");
  ExperimentConfig c;
  c.name = root.get<std::string>("name", c.name);

  {
    Section s(root.raw("network"), "network");
    c.network.pull = parse_graph(s.raw("pull"), "network.pull");
    if (s.has("push")) c.network.push = parse_graph(s.raw("push"), "network.push");
    s.mark("push");
    c.network.leaders = s.get<std::vector<std::size_t>>("leaders", {});
    c.network.leader_seed = s.get<std::uint64_t>("leader_seed", 0);
    c.network.leader_follower = s.get<bool>("leader_follower", true);
    c.network.activation_probability = s.get<double>("activation_probability", 1.0);
    c.network.activation_seed = s.get<std::uint64_t>("activation_seed", 0);
    const double p = c.network.activation_probability;
    require(p > 0.0 && p <= 1.0, s.key("activation_probability"), "must lie in (0, 1]");
    if (c.network.pull.generator != "file") {
      for (auto id : c.network.leaders) {
        require(id >= 1 && id <= c.network.pull.n, s.key("leaders"), "id out of range");
      }
    }
    require(c.network.leaders.empty() || !c.network.push, s.key("leaders"),
            "cannot be combined with an explicit push graph");
    if (c.network.push && c.network.push->generator != "file" &&
        c.network.pull.generator != "file") {
      require(c.network.push->n == c.network.pull.n, "network.push.n", "must equal network.pull.n");
    }
    s.finish();
  }

  c.objective = root.raw("objective");
  require(c.objective.is_object(), "objective", "must be an object");
  if (c.objective.contains("n") && c.network.pull.generator != "file") {
    require(c.objective.at("n").is_number_integer() &&
                c.objective.at("n").get<std::int64_t>() == std::int64_t(c.network.pull.n),
            "objective.n", "must equal network.pull.n");
  }

  {
    Section a(root.raw("algorithm"), "algorithm");
    auto& al = c.algorithm;
    al.family = a.get<std::string>("family", al.family);
    require(al.family == "pushpull" || al.family == "gossip", a.key("family"),
            "must be 'pushpull' or 'gossip'");
    al.variant = a.get<std::string>("variant", al.variant);
    require(std::set<std::string>{"standard", "half", "atc_x", "atc_y", "atc_both"}.count(al.variant),
            a.key("variant"), "unknown variant '" + al.variant + "'");
    al.mode = a.get<std::string>("mode", al.mode);
    require(std::set<std::string>{"restricted", "general", "all"}.count(al.mode), a.key("mode"),
            "unknown gossip mode '" + al.mode + "'");
    al.stepsize = parse_stepsize(a);
    if (a.has("gamma")) {
      const json& g = a.raw("gamma");
      if (g.is_string()) {
        require(g.get<std::string>() == "auto", a.key("gamma"), "expected a number or \"auto\"");
      } else {
        require(g.is_number(), a.key("gamma"), "expected a number or \"auto\"");
        al.gamma = g.get<double>();
        require(*al.gamma > 0.0 && *al.gamma < 1.0, a.key("gamma"), "must lie in (0, 1)");
      }
    } else {
      a.mark("gamma");
    }
    al.budget = a.get<std::uint64_t>("budget", al.budget);
    require(al.budget >= 1, a.key("budget"), "must be positive");
    al.tol = a.get<double>("tol", al.tol);
    require(al.tol >= 0.0, a.key("tol"), "must be nonnegative");
    if (a.has("stationarity_tol")) {
      al.stationarity_tol = a.get<double>("stationarity_tol");
      require(*al.stationarity_tol > 0.0, a.key("stationarity_tol"), "must be positive");
    } else {
      a.mark("stationarity_tol");
    }
    al.divergence_threshold = a.get<double>("divergence_threshold", al.divergence_threshold);
    require(al.divergence_threshold > 0.0, a.key("divergence_threshold"), "must be positive");
    al.seeds = a.get<std::vector<std::uint64_t>>("seeds", al.seeds);
    require(!al.seeds.empty(), a.key("seeds"), "must not be empty");
    al.ticks_per_record = a.get<std::uint64_t>("ticks_per_record", 0);
    al.record_every = a.get<std::uint64_t>("record_every", 1);
    require(al.record_every >= 1, a.key("record_every"), "must be positive");
    al.certify = a.get<bool>("certify", false);
    al.epsilon = a.get<double>("epsilon", 0.0);
    require(al.epsilon >= 0.0, a.key("epsilon"), "must be nonnegative");
    a.finish();
  }

  if (root.has("output")) {
    Section o(root.raw("output"), "output");
    c.output.directory = o.get<std::string>("directory", c.output.directory);
    c.output.formats = o.get<std::vector<std::string>>("formats", c.output.formats);
    for (const auto& f : c.output.formats) {
      require(f == "csv" || f == "json", o.key("formats"), "unknown format '" + f + "'");
    }
    c.output.events = o.get<bool>("events", false);
    o.finish();
  } else {
    root.mark("output");
  }
  root.finish();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open file");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path, std::string("parse error: ") + e.what());
  }
  return parse_config(j);
}

json to_json(const ExperimentConfig& c) {
  json net{{"pull", graph_json(c.network.pull)},
           {"leaders", c.network.leaders},
           {"leader_seed", c.network.leader_seed},
           {"leader_follower", c.network.leader_follower},
           {"activation_probability", c.network.activation_probability},
           {"activation_seed", c.network.activation_seed}};
  if (c.network.push) net["push"] = graph_json(*c.network.push);
  const auto& al = c.algorithm;
  json alg{{"family", al.family},
           {"variant", al.variant},
           {"mode", al.mode},
           {"stepsize", stepsize_json(al.stepsize)},
           {"active_agents", al.stepsize.active},
           {"gamma", al.gamma ? json(*al.gamma) : json("auto")},
           {"budget", al.budget},
           {"tol", al.tol},
           {"stationarity_tol", al.stationarity_tol ? json(*al.stationarity_tol) : json(nullptr)},
           {"divergence_threshold", al.divergence_threshold},
           {"seeds", al.seeds},
           {"ticks_per_record", al.ticks_per_record},
           {"record_every", al.record_every},
           {"certify", al.certify},
           {"epsilon", al.epsilon}};
  json out{{"directory", c.output.directory},
           {"formats", c.output.formats},
           {"events", c.output.events}};
  return json{{"name", c.name},
              {"network", net},
              {"objective", c.objective},
              {"algorithm", alg},
              {"output", out}};
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const ExperimentConfig& c) { return fnv1a_hex(to_json(c).dump()); }

}  // namespace pushpull
