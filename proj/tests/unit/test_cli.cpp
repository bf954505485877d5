#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kSrc = PUSHPULL_SOURCE_DIR;

struct Result {
  int code = -1;
  std::string out;
};

Result cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " \"" + std::string(PUSHPULL_CLI) + "\" " + args + " 2>/dev/null";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p);
  char buf[4096];
  std::size_t got;
  while ((got = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, got);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("pushpull_cli_" + std::to_string(getpid())) / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in);
  return json::parse(in);
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("malformed config exits 2 naming the key") {
    const auto r = cli("run " + kSrc + "/fixtures/malformed.json --out-dir " + q(scratch("malformed")));
    CHECK(r.code == 2);
    CHECK(r.out.find("algorithm.budgett") != std::string::npos);
    CHECK(cli("run").code == 2);
    CHECK(cli("frobnicate").code == 2);
  }

  TEST_CASE("gamma above the limit exits 3") {
    const auto d = scratch("gamma");
    const auto r = cli("certify " + kSrc + "/fixtures/gossip_gamma_too_large.json --out-dir " + q(d));
    CHECK(r.code == 3);
    CHECK(r.out.find("gamma too large") != std::string::npos);
    CHECK(fs::exists(d / "error.json"));
  }

  TEST_CASE("divergence exits 4") {
    const auto d = scratch("diverge");
    const json cfg = {
        {"name", "diverge"},
        {"network", {{"pull", {{"generator", "ring"}, {"n", 3}}}}},
        {"objective", {{"type", "random_quadratic"}, {"n", 3}, {"p", 2}, {"seed", 5}}},
        {"algorithm", {{"family", "pushpull"}, {"stepsize", 5.0}, {"budget", 2000}}}};
    std::ofstream(d / "diverge.json") << cfg.dump();
    const auto r = cli("run " + q(d / "diverge.json") + " --out-dir " + q(d / "out"));
    CHECK(r.code == 4);
    CHECK(fs::exists(d / "out" / "error.json"));
  }

  TEST_CASE("output directory from the environment") {
    const auto d = scratch("env");
    const auto r = cli("run " + kSrc + "/configs/star_centralized.json", "PUSHPULL_OUTPUT_DIR=" + q(d));
    CHECK(r.code == 0);
    CHECK(fs::exists(d / "trace.csv"));
    CHECK(fs::exists(d / "summary.json"));
    const auto s = read_json(d / "summary.json");
    CHECK(s.at("status") == "converged");

    // The flag wins over the environment.
    const auto flag = scratch("flag");
    CHECK(cli("run " + kSrc + "/configs/star_centralized.json --out-dir " + q(flag),
              "PUSHPULL_OUTPUT_DIR=" + q(d / "unused"))
              .code == 0);
    CHECK(fs::exists(flag / "trace.csv"));
    CHECK_FALSE(fs::exists(d / "unused"));

    const auto fr = cli("fit-rate " + q(d / "trace.csv"));
    REQUIRE(fr.code == 0);
    const auto fit = json::parse(fr.out);
    CHECK(fit.at("rate").get<double>() > 0.0);
    CHECK(fit.at("rate").get<double>() < 1.0);
    CHECK(cli("fit-rate " + q(d / "missing.csv")).code == 2);
  }

  TEST_CASE("validate") {
    const auto star = cli("validate --graph " + kSrc + "/fixtures/star_pull.txt --push-graph " + kSrc +
                          "/fixtures/star_push.txt");
    REQUIRE(star.code == 0);
    const auto j = json::parse(star.out);
    CHECK(j.at("ok") == true);
    CHECK(j.at("common_roots") == json::array({1}));

    const auto bad = cli("validate --graph " + kSrc + "/fixtures/disconnected4.txt");
    CHECK(bad.code == 3);
    CHECK(json::parse(bad.out).at("ok") == false);

    // Single gossip event matrices: stochastic, but not connected on their own.
    const auto m = cli("validate --R " + kSrc + "/fixtures/pull4_R.csv --C " + kSrc + "/fixtures/pull4_C.csv");
    const auto checks = json::parse(m.out).at("checks");
    bool stochastic = false;
    for (const auto& c : checks) {
      if (c.at("name") == "stochastic") stochastic = c.at("passed").get<bool>();
    }
    CHECK(stochastic);

    const auto zero = cli("validate --graph " + kSrc + "/fixtures/star_pull.txt --push-graph " + kSrc +
                          "/fixtures/star_push.txt --alphas 0,1,1,1");
    CHECK(zero.code == 3);
  }

  TEST_CASE("certify with equal stepsizes reports the M rule") {
    const auto d = scratch("equal");
    const auto r = cli("certify " + kSrc + "/fixtures/equal_stepsize.json --out-dir " + q(d));
    CHECK(r.code == 0);
    const auto c = read_json(d / "certificate.json");
    CHECK(c.at("rho").get<double>() < 1.0);
    bool found = false;
    for (const auto& s : c.at("diagnostics")) found = found || s == "M rule: u^T v / n";
    CHECK(found);
  }

  TEST_CASE("gen-graph") {
    const auto r = cli("gen-graph --kind random --n 8 --m 14 --seed 3");
    REQUIRE(r.code == 0);
    std::istringstream in(r.out);
    std::size_t n = 0, m = 0;
    in >> n >> m;
    CHECK(n == 8);
    CHECK(m == 14);
    CHECK(cli("gen-graph --kind random --n 8 --m 14 --seed 3").out == r.out);

    const auto d = scratch("gen");
    CHECK(cli("gen-graph --kind ring --n 5 --out " + q(d / "ring.txt")).code == 0);
    const auto v = cli("validate --graph " + q(d / "ring.txt"));
    CHECK(v.code == 0);
    CHECK(cli("gen-graph --kind random --n 4 --m 2").code == 2);
  }
}
